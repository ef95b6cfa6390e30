"""Generative model: label prior, pairwise edge process, likelihood, sampling.

Labels live in ``{0, .., num_labels-1}``. A full assignment of ``n`` items is
packed into a single integer code in radix ``num_labels``, with item 0 in the
most significant digit, so the code's numeral string reads item 0 leftmost.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator, Sequence

import numpy as np

from .errors import ValidationError

if TYPE_CHECKING:
    from .bounds import AlphaGrid

# Full-table enumeration cap: num_labels**n must stay within 2**MAX_TABLE_BITS.
MAX_TABLE_BITS = 26


def rng_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for stream ``index`` derived from a master seed.

    Streams are keyed by (seed, index), so results never depend on how work
    is scheduled across workers.
    """
    return np.random.default_rng([int(seed), int(index)])


@dataclass(frozen=True)
class SbmParams:
    """Model parameters: item count, label alphabet, edge probabilities.

    ``q_in`` applies to same-label pairs, ``q_out`` to cross-label pairs,
    and ``0 < q_out < q_in < 1`` is required so every observation has
    positive probability under every labeling.
    """

    n: int
    num_labels: int
    q_in: float
    q_out: float
    label_prior: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"n must be positive, got {self.n}")
        if self.num_labels < 2:
            raise ValidationError(f"num_labels must be >= 2, got {self.num_labels}")
        if not (0.0 < self.q_out < self.q_in < 1.0):
            raise ValidationError(
                f"need 0 < q_out < q_in < 1, got q_in={self.q_in}, q_out={self.q_out}"
            )
        if self.n * math.log2(self.num_labels) > MAX_TABLE_BITS:
            raise ValidationError(
                f"n*log2(num_labels) = {self.n * math.log2(self.num_labels):.2f} "
                f"exceeds the enumeration cap of {MAX_TABLE_BITS} bits"
            )
        if self.label_prior is None:
            object.__setattr__(
                self, "label_prior", (1.0 / self.num_labels,) * self.num_labels
            )
        else:
            prior = tuple(float(p) for p in self.label_prior)
            if len(prior) != self.num_labels:
                raise ValidationError("label_prior length must equal num_labels")
            if any(p < 0 for p in prior):
                raise ValidationError("label_prior entries must be nonnegative")
            if abs(sum(prior) - 1.0) > 1e-12:
                raise ValidationError("label_prior must sum to 1 within 1e-12")
            object.__setattr__(self, "label_prior", prior)

    @property
    def num_configs(self) -> int:
        return self.num_labels**self.n

    @property
    def uniform_prior(self) -> bool:
        p0 = self.label_prior[0]
        return all(abs(p - p0) <= 1e-15 for p in self.label_prior)

    def pairs(self) -> Iterator[tuple[int, int]]:
        """All unordered item pairs, in lexicographic (i, j) order with i < j."""
        for i in range(self.n):
            for j in range(i + 1, self.n):
                yield i, j


@dataclass(frozen=True)
class LabelConfig:
    """One full label assignment packed as a radix-``num_labels`` integer."""

    code: int
    n: int
    num_labels: int

    def __post_init__(self) -> None:
        if not 0 <= self.code < self.num_labels**self.n:
            raise ValidationError(
                f"code {self.code} out of range for {self.n} items, "
                f"{self.num_labels} labels"
            )

    def labels(self) -> tuple[int, ...]:
        """Per-item labels, item 0 first."""
        out = []
        c = self.code
        for _ in range(self.n):
            out.append(c % self.num_labels)
            c //= self.num_labels
        return tuple(reversed(out))

    @classmethod
    def from_labels(
        cls, labels: Sequence[int], num_labels: int
    ) -> "LabelConfig":
        code = 0
        for lab in labels:
            if not 0 <= lab < num_labels:
                raise ValidationError(f"label {lab} out of range")
            code = code * num_labels + int(lab)
        return cls(code=code, n=len(labels), num_labels=num_labels)

    def __str__(self) -> str:
        return "".join(str(d) for d in self.labels())


@dataclass(frozen=True)
class Observation:
    """Symmetric binary pairwise observation; only pairs i < j are stored."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise ValidationError(f"edge ({i}, {j}) is not 0 <= i < j < n")

    @classmethod
    def from_edge_list(cls, n: int, edges: Sequence[Sequence[int]]) -> "Observation":
        normed = frozenset((int(i), int(j)) for i, j in edges)
        return cls(n=n, edges=normed)

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        if i > j:
            i, j = j, i
        return (i, j) in self.edges


def sample_labels(params: SbmParams, rng: np.random.Generator) -> LabelConfig:
    """Draw each item's label independently from the label prior."""
    labels = rng.choice(params.num_labels, size=params.n, p=params.label_prior)
    return LabelConfig.from_labels([int(x) for x in labels], params.num_labels)


def sample_observation(
    params: SbmParams, labels: LabelConfig, rng: np.random.Generator
) -> Observation:
    """Draw each pair's edge independently: present iff U <= q_in (same label)
    or U <= q_out (different labels)."""
    if labels.n != params.n or labels.num_labels != params.num_labels:
        raise ValidationError("labels do not match params")
    lab = labels.labels()
    pair_list = list(params.pairs())
    if not pair_list:
        return Observation(n=params.n, edges=frozenset())
    u = rng.random(len(pair_list))
    edges = set()
    for k, (i, j) in enumerate(pair_list):
        delta = params.q_in if lab[i] == lab[j] else params.q_out
        if u[k] <= delta:
            edges.add((i, j))
    return Observation(n=params.n, edges=frozenset(edges))


def log_likelihood(
    params: SbmParams, labels: LabelConfig, obs: Observation
) -> float:
    """Log probability of the observation given a full label assignment.

    Sum over pairs of the Bernoulli log-pmf with success probability q_in
    for same-label pairs and q_out for cross-label pairs.
    """
    if labels.n != params.n or obs.n != params.n:
        raise ValidationError("size mismatch between params, labels, observation")
    lab = labels.labels()
    total = 0.0
    for i, j in params.pairs():
        delta = params.q_in if lab[i] == lab[j] else params.q_out
        if obs.has_edge(i, j):
            total += math.log(delta)
        else:
            total += math.log1p(-delta)
    return total


@dataclass(frozen=True)
class ScenarioConfig:
    """One Monte Carlo scenario: rate constants (a, b) with q = rate*ln(n)/n.

    The natural logarithm is used throughout for the edge-probability rates;
    this choice is recorded in result metadata.
    """

    a: float
    b: float
    n: int = 15
    num_labels: int = 2
    m_max: int = 8
    realizations: int = 50
    seed: int = 0
    scenario_id: str = "scenario"
    alpha_grid: "AlphaGrid | None" = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.m_max < 0 or self.m_max > self.n:
            raise ValidationError("m_max must be in [0, n]")
        if self.realizations < 1:
            raise ValidationError("realizations must be >= 1")
        self.to_params()  # validates the derived q values

    @property
    def q_in(self) -> float:
        return self.a * math.log(self.n) / self.n

    @property
    def q_out(self) -> float:
        return self.b * math.log(self.n) / self.n

    @property
    def eta(self) -> float:
        """Recovery diagnostic (sqrt(a) - sqrt(b)) / sqrt(2); recorded only."""
        return (math.sqrt(self.a) - math.sqrt(self.b)) / math.sqrt(2.0)

    def to_params(self) -> SbmParams:
        return SbmParams(
            n=self.n, num_labels=self.num_labels, q_in=self.q_in, q_out=self.q_out
        )


def default_scenarios(
    n: int = 15,
    num_labels: int = 2,
    m_max: int = 8,
    realizations: int = 50,
    seed: int = 20260809,
) -> list[ScenarioConfig]:
    """The three stock scenarios: (a, b) in {(2, 0.25), (2, 0.15), (3, 0.15)}."""
    rates = [("scenario1", 2.0, 0.25), ("scenario2", 2.0, 0.15), ("scenario3", 3.0, 0.15)]
    return [
        ScenarioConfig(
            a=a,
            b=b,
            n=n,
            num_labels=num_labels,
            m_max=m_max,
            realizations=realizations,
            seed=seed,
            scenario_id=sid,
        )
        for sid, a, b in rates
    ]


# ---------------------------------------------------------------------------
# JSON file formats
# ---------------------------------------------------------------------------

def save_graph(path: str, params: SbmParams, obs: Observation) -> None:
    """Write a graph file: n, num_labels, q_in, q_out and 0-based edges i < j."""
    doc = {
        "n": params.n,
        "num_labels": params.num_labels,
        "q_in": params.q_in,
        "q_out": params.q_out,
        "edges": [[i, j] for i, j in obs.edge_list()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_graph(path: str) -> tuple[SbmParams, Observation]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed graph file {path}: {exc}") from exc
    try:
        params = SbmParams(
            n=int(doc["n"]),
            num_labels=int(doc["num_labels"]),
            q_in=float(doc["q_in"]),
            q_out=float(doc["q_out"]),
        )
        obs = Observation.from_edge_list(params.n, doc["edges"])
    except KeyError as exc:
        raise ValidationError(f"graph file {path} is missing field {exc}") from exc
    return params, obs


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    doc = {
        "scenario_id": cfg.scenario_id,
        "a": cfg.a,
        "b": cfg.b,
        "n": cfg.n,
        "num_labels": cfg.num_labels,
        "m_max": cfg.m_max,
        "realizations": cfg.realizations,
        "seed": cfg.seed,
    }
    if cfg.alpha_grid is not None:
        doc["alpha_grid"] = cfg.alpha_grid.to_dict()
    return doc


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    from .bounds import AlphaGrid  # deferred: bounds depends on posterior/model

    grid = None
    if "alpha_grid" in doc and doc["alpha_grid"] is not None:
        grid = AlphaGrid.from_dict(doc["alpha_grid"])
    try:
        return ScenarioConfig(
            a=float(doc["a"]),
            b=float(doc["b"]),
            n=int(doc.get("n", 15)),
            num_labels=int(doc.get("num_labels", 2)),
            m_max=int(doc.get("m_max", 8)),
            realizations=int(doc.get("realizations", 50)),
            seed=int(doc.get("seed", 0)),
            scenario_id=str(doc.get("scenario_id", "scenario")),
            alpha_grid=grid,
        )
    except KeyError as exc:
        raise ValidationError(f"scenario config missing field {exc}") from exc


def load_scenarios(path: str) -> list[ScenarioConfig]:
    """Read one scenario object or a {"scenarios": [...]} collection."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed scenario file {path}: {exc}") from exc
    if isinstance(doc, dict) and "scenarios" in doc:
        items = doc["scenarios"]
    elif isinstance(doc, list):
        items = doc
    else:
        items = [doc]
    return [scenario_from_dict(d) for d in items]


def save_scenarios(path: str, scenarios: Sequence[ScenarioConfig]) -> None:
    doc = {"scenarios": [scenario_to_dict(c) for c in scenarios]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
