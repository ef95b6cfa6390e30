"""Optimal adaptive query selection as a subset-memoized dynamic program.

The recursion's value at a state depends only on which items were queried
and their revealed labels, not on the query order, so the exponential
order-labeled decision tree collapses onto per-subset value tables.

Two value scales are used:

* "map" mode (binary loss): a state's value is the largest joint posterior
  mass reachable by optimal future queries; interior states take the max
  over the next item of the sum of child values. The root value is the
  correct-classification probability of the optimal policy.
* "risk" mode: a state's value is the minimum expected loss weighted by the
  state's posterior mass (mass-weighted risk); interior states take the min
  over the next item of the sum of child values. The root value is the
  conditional risk of the optimal policy.

Label sums always accumulate in ascending label order and candidate scans
run in ascending item order with strict improvement, so ties resolve to the
smallest item index and results are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .errors import UnreachableStateError, ValidationError
from .posterior import PosteriorTable
from .states import insert_digit, reduce_pattern_axis, state_space

# Refuse plans whose value tables would exceed this many entries.
MEMORY_CAP_VALUES = 2**27
# Largest intermediate level (in values) the top-down max pass may build;
# beyond it, leaf tables are reduced subset by subset from the full table.
DOWN_PASS_LIMIT = 2**25
# Full-enumeration loss evaluation is exponential in the unqueried set.
ENUMERATION_CAP_N = 10


@dataclass(frozen=True)
class LossFunction:
    """Loss between a full estimated configuration and the truth.

    ``binary`` charges 1 for any mismatch; ``hamming`` counts mismatched
    items.
    """

    kind: str

    def __post_init__(self) -> None:
        if self.kind not in ("binary", "hamming"):
            raise ValidationError(f"unknown loss kind {self.kind!r}")

    def __call__(self, estimate: Sequence[int], truth: Sequence[int]) -> float:
        if len(estimate) != len(truth):
            raise ValidationError("loss arguments must have equal length")
        if self.kind == "binary":
            return 0.0 if tuple(estimate) == tuple(truth) else 1.0
        return float(sum(e != t for e, t in zip(estimate, truth)))


BINARY = LossFunction("binary")
HAMMING = LossFunction("hamming")


# ---------------------------------------------------------------------------
# leaf tables
# ---------------------------------------------------------------------------

def _leaf_max_level(table: PosteriorTable, m: int) -> np.ndarray:
    """Per-subset, per-pattern maximum posterior over all completions.

    Cached on the table. Levels are filled top-down from the full table by
    collapsing one item at a time (max is exact regardless of association),
    unless an intermediate level would be too large, in which case the level
    is reduced directly subset by subset.
    """
    cache = table._cache
    key = ("leafmax", m)
    if key in cache:
        return cache[key]
    n, L = table.n, table.num_labels
    space = state_space(n, L)
    if m == n:
        out = table.probs.reshape(1, -1)
    else:
        start = next(
            (c for c in range(m + 1, n + 1) if ("leafmax", c) in cache), n
        )
        if any(
            space.level_size(c) > DOWN_PASS_LIMIT for c in range(m + 1, start)
        ):
            out = _leaf_max_direct(table, m)
        else:
            cur = _leaf_max_level(table, start)
            for c in range(start, m, -1):
                cur = _max_pass_down(table, c, cur)
                if c - 1 > m:
                    cache[("leafmax", c - 1)] = cur
            out = cur
    out = np.ascontiguousarray(out)
    out.flags.writeable = False
    cache[key] = out
    return out


def _max_pass_down(table: PosteriorTable, c: int, upper: np.ndarray) -> np.ndarray:
    """Level c-1 leaf-max table from level c by dropping one item per subset."""
    n, L = table.n, table.num_labels
    space = state_space(n, L)
    masks = space.masks(c - 1).astype(np.int64)
    missing = ~masks
    lsb = missing & -missing
    child_row = np.searchsorted(space.masks(c), masks | lsb)
    pos = np.bitwise_count(masks & (lsb - 1)).astype(np.int64)
    out = np.empty((masks.size, L ** (c - 1)), dtype=np.float64)
    for p in range(c):
        sel = np.nonzero(pos == p)[0]
        if sel.size == 0:
            continue
        out[sel] = reduce_pattern_axis(upper[child_row[sel]], p, c, L, "max")
    return out


def _leaf_max_direct(table: PosteriorTable, m: int) -> np.ndarray:
    n, L = table.n, table.num_labels
    space = state_space(n, L)
    items = space.items(m)
    tensor = table.probs.reshape((L,) * n)
    out = np.empty((items.shape[0], L**m), dtype=np.float64)
    for r in range(items.shape[0]):
        own = [int(i) for i in items[r]]
        comp = [i for i in range(n) if i not in own]
        arr = np.transpose(tensor, axes=own + comp).reshape(L**m, -1)
        out[r] = arr.max(axis=1) if comp else arr[:, 0]
    return out


def _mass_level(table: PosteriorTable, m: int) -> np.ndarray:
    """Posterior mass of every (subset, pattern) state.

    Accumulated per bucket in ascending configuration-code order (unbuffered
    scatter-add), matching a sequential scan term for term.
    """
    cache = table._cache
    key = ("mass", m)
    if key in cache:
        return cache[key]
    n, L = table.n, table.num_labels
    space = state_space(n, L)
    items = space.items(m)
    probs = table.probs
    out = np.zeros((items.shape[0], L**m), dtype=np.float64)
    for r in range(items.shape[0]):
        pats = space.pattern_of_codes(items[r])
        np.add.at(out[r], pats, probs)
    out.flags.writeable = False
    cache[key] = out
    return out


# ---------------------------------------------------------------------------
# plan construction
# ---------------------------------------------------------------------------

class QueryPlan:
    """Memoized value tables of the optimal query policy for one budget."""

    def __init__(
        self,
        table: PosteriorTable,
        budget: int,
        loss: LossFunction,
        mode: str,
        values: list[np.ndarray],
    ):
        self.table = table
        self.budget = budget
        self.loss = loss
        self.mode = mode
        self.values = values
        self._space = state_space(table.n, table.num_labels)

    @property
    def root_value(self) -> float:
        return float(self.values[0][0, 0])

    @property
    def state_count(self) -> int:
        return sum(v.size for v in self.values)

    def _state(self, revealed: Mapping[int, int]) -> tuple[int, int, int]:
        m = len(revealed)
        if m > self.budget:
            raise UnreachableStateError(
                f"state of size {m} exceeds budget {self.budget}"
            )
        items = sorted(revealed)
        L = self.table.num_labels
        for i in items:
            if not 0 <= i < self.table.n:
                raise ValidationError(f"item {i} out of range")
            if not 0 <= revealed[i] < L:
                raise ValidationError(f"label {revealed[i]} out of range")
        mask = sum(1 << i for i in items)
        row = self._space.rank(m, mask)
        pattern = 0
        for i in items:
            pattern = pattern * L + revealed[i]
        return m, row, pattern

    def value_of(self, revealed: Mapping[int, int]) -> float:
        m, row, pattern = self._state(revealed)
        return float(self.values[m][row, pattern])

    def _candidates(self, m: int, row: int, pattern: int) -> list[tuple[int, float]]:
        L = self.table.num_labels
        child_row, child_pos = self._space.child_tables(m)
        nxt = self.values[m + 1]
        out = []
        for j in range(self.table.n):
            crow = int(child_row[row, j])
            if crow < 0:
                continue
            p = int(child_pos[row, j])
            total = 0.0
            for lab in range(L):
                total += nxt[crow, insert_digit(pattern, p, lab, m, L)]
            out.append((j, total))
        return out

    def _best_item(self, m: int, row: int, pattern: int) -> int:
        best_j = -1
        best_v = None
        better = (lambda a, b: a > b) if self.mode == "map" else (lambda a, b: a < b)
        for j, v in self._candidates(m, row, pattern):
            if best_v is None or better(v, best_v):
                best_j, best_v = j, v
        return best_j

    def next_query(self, revealed: Mapping[int, int]) -> int:
        """Optimal next item at a state reached by following the policy."""
        if len(revealed) >= self.budget:
            raise UnreachableStateError(
                f"no query remains at size {len(revealed)} with budget {self.budget}"
            )
        self._state(revealed)  # validates items/labels
        walked: dict[int, int] = {}
        for _ in range(len(revealed)):
            m, row, pattern = self._state(walked)
            j = self._best_item(m, row, pattern)
            if j not in revealed:
                raise UnreachableStateError(
                    f"state {dict(revealed)} is not reachable: policy queries {j}"
                )
            walked[j] = revealed[j]
        m, row, pattern = self._state(walked)
        return self._best_item(m, row, pattern)

    def realized_tree(self) -> dict:
        """The decision tree actually traversed by the optimal policy."""

        def node(revealed: dict[int, int]) -> dict:
            m, row, pattern = self._state(revealed)
            value = float(self.values[m][row, pattern])
            doc = {
                "revealed": {str(i): revealed[i] for i in sorted(revealed)},
                "next_item": None,
                "value": value,
            }
            if m < self.budget:
                j = self._best_item(m, row, pattern)
                doc["next_item"] = j
                doc["children"] = {
                    str(lab): node({**revealed, j: lab})
                    for lab in range(self.table.num_labels)
                }
            return doc

        return node({})


def build_plan(
    table: PosteriorTable,
    budget: int,
    loss: LossFunction = BINARY,
    mode: str | None = None,
) -> QueryPlan:
    """Bottom-up value tables for the optimal policy with ``budget`` queries."""
    n, L = table.n, table.num_labels
    if not 0 <= budget <= n:
        raise ValidationError(f"budget {budget} exceeds item count {n}")
    if mode is None:
        mode = "map" if loss.kind == "binary" else "risk"
    if mode == "map" and loss.kind != "binary":
        raise ValidationError("map mode is defined by the binary loss")
    if mode not in ("map", "risk"):
        raise ValidationError(f"unknown mode {mode!r}")
    space = state_space(n, L)
    total_states = sum(space.level_size(m) for m in range(budget + 1))
    if total_states > MEMORY_CAP_VALUES:
        raise ValidationError(
            f"plan needs {total_states} state values, over the cap of "
            f"{MEMORY_CAP_VALUES}"
        )

    if mode == "map":
        leaf = _leaf_max_level(table, budget)
    elif loss.kind == "binary":
        leaf = _mass_level(table, budget) - _leaf_max_level(table, budget)
    else:
        leaf = _hamming_leaf(table, budget)

    values: list[np.ndarray] = [None] * (budget + 1)  # type: ignore[list-item]
    values[budget] = leaf
    combine = np.maximum if mode == "map" else np.minimum
    fill = -np.inf if mode == "map" else np.inf
    for m in range(budget - 1, -1, -1):
        child_row, child_pos = space.child_tables(m)
        upper = values[m + 1]
        out = np.full((math.comb(n, m), L**m), fill)
        for j in range(n):
            rows = child_row[:, j]
            pos = child_pos[:, j]
            for p in range(m + 1):
                sel = np.nonzero((rows >= 0) & (pos == p))[0]
                if sel.size == 0:
                    continue
                cand = reduce_pattern_axis(upper[rows[sel]], p, m + 1, L, "sum")
                out[sel] = combine(out[sel], cand)
        values[m] = out
    for v in values:
        v.flags.writeable = False
    return QueryPlan(table, budget, loss, mode, values)


def _hamming_leaf(table: PosteriorTable, budget: int) -> np.ndarray:
    """Mass-weighted minimum expected mismatch count at each leaf state.

    The optimal estimate under the mismatch-count loss labels each unqueried
    item by its conditional marginal mode, so the leaf value is the sum over
    unqueried items of (state mass - best single-item marginal mass),
    accumulated in ascending item order.
    """
    n, L = table.n, table.num_labels
    space = state_space(n, L)
    mass = _mass_level(table, budget)
    out = np.zeros_like(mass)
    if budget == n:
        return out
    child_mass = _mass_level(table, budget + 1)
    child_row, child_pos = space.child_tables(budget)
    for j in range(n):
        rows = child_row[:, j]
        pos = child_pos[:, j]
        for p in range(budget + 1):
            sel = np.nonzero((rows >= 0) & (pos == p))[0]
            if sel.size == 0:
                continue
            best = reduce_pattern_axis(
                child_mass[rows[sel]], p, budget + 1, L, "max"
            )
            out[sel] = out[sel] + (mass[sel] - best)
    return out


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------

def pc_ssp(plan: QueryPlan) -> float:
    """Correct-classification probability of the optimal adaptive policy.

    Equals the sum, over the label paths the policy can traverse, of the
    largest joint posterior consistent with each path.
    """
    if plan.loss.kind != "binary" or plan.mode != "map":
        raise ValidationError("pc_ssp needs a binary-loss plan in map mode")
    return plan.root_value


def pc_batch(table: PosteriorTable, items: Sequence[int]) -> float:
    """Correct-classification probability of the fixed batch querying ``items``."""
    items = sorted(int(i) for i in items)
    n, L = table.n, table.num_labels
    if len(set(items)) != len(items):
        raise ValidationError("batch items must be distinct")
    for i in items:
        if not 0 <= i < n:
            raise ValidationError(f"item {i} out of range")
    m = len(items)
    comp = [i for i in range(n) if i not in items]
    tensor = table.probs.reshape((L,) * n)
    arr = np.transpose(tensor, axes=items + comp).reshape(L**m, -1)
    best = arr.max(axis=1) if comp else arr[:, 0]
    return float(np.sum(best))


def al_gain(table: PosteriorTable, pc_ssp_value: float) -> float:
    """Ratio of the policy's success probability to the no-query MAP baseline."""
    f1 = table.map_prob
    if not f1 - 1e-9 <= pc_ssp_value <= 1.0 + 1e-9:
        raise ValidationError(
            f"pc value {pc_ssp_value!r} outside [{f1!r}, 1]"
        )
    return pc_ssp_value / f1


def leaf_risk_by_enumeration(
    table: PosteriorTable, revealed: Mapping[int, int], loss: LossFunction
) -> float:
    """Reference leaf evaluation: minimum conditional expected loss by full
    enumeration over estimates of the unqueried items. Exponential; capped."""
    n, L = table.n, table.num_labels
    if n > ENUMERATION_CAP_N:
        raise ValidationError(
            f"enumeration leaf evaluation capped at n <= {ENUMERATION_CAP_N}"
        )
    mask = table.consistent_mask(revealed)
    codes = np.nonzero(mask)[0]
    weight = table.probs[codes]
    total = float(np.sum(weight))
    if total <= 0.0:
        raise ValidationError("revealed labels have zero posterior mass")
    digits = table.digits()[codes]
    free = [i for i in range(n) if i not in revealed]
    best = math.inf
    for est_free in product(range(L), repeat=len(free)):
        est = [0] * n
        for i, lab in revealed.items():
            est[i] = lab
        for i, lab in zip(free, est_free):
            est[i] = lab
        risk = 0.0
        for row, w in zip(digits, weight):
            risk += loss(est, row.tolist()) * float(w)
        if risk < best:
            best = risk
    return best / total
