"""Subset-indexed state tables for the query dynamic program.

A DP state is (set of queried items, their labels). Levels are grouped by
subset size m: level m holds one row per m-item subset (rows ordered by
ascending bitmask) and one column per label pattern. Patterns index the
labels of the subset's items in ascending item order, most significant digit
first, matching the packing of full configurations: the pattern of the
full-item subset is the configuration code itself.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations

import numpy as np


@lru_cache(maxsize=8)
def digit_matrix(n: int, num_labels: int) -> np.ndarray:
    """(num_labels**n, n) matrix; column i is item i's label per config code."""
    codes = np.arange(num_labels**n, dtype=np.int64)
    dtype = np.uint8 if num_labels <= 255 else np.int32
    out = np.empty((codes.size, n), dtype=dtype)
    for i in range(n):
        out[:, i] = (codes // num_labels ** (n - 1 - i)) % num_labels
    out.flags.writeable = False
    return out


def pattern_weights(m: int, num_labels: int) -> np.ndarray:
    """Multipliers L**(m-1-k) for digit position k of an m-digit pattern."""
    return num_labels ** np.arange(m - 1, -1, -1, dtype=np.int64)


def insert_digit(pattern: int, pos: int, label: int, m: int, num_labels: int) -> int:
    """Pattern of size m+1 obtained by inserting ``label`` at position ``pos``
    into an m-digit ``pattern``."""
    block = num_labels ** (m - pos)
    hi, lo = divmod(pattern, block)
    return (hi * num_labels + label) * block + lo


def reduce_pattern_axis(arr: np.ndarray, pos: int, ndigits: int, num_labels: int,
                        op: str) -> np.ndarray:
    """Collapse digit ``pos`` of ``ndigits``-digit patterns along each row.

    ``op`` is "max", "min", or "sum"; "sum" accumulates label values in
    ascending order so results are reproducible term by term.
    """
    rows = arr.shape[0]
    before = num_labels**pos
    after = num_labels ** (ndigits - 1 - pos)
    cube = arr.reshape(rows, before, num_labels, after)
    if op == "max":
        out = cube.max(axis=2)
    elif op == "min":
        out = cube.min(axis=2)
    elif op == "sum":
        acc = cube[:, :, 0, :].copy()
        for lab in range(1, num_labels):
            acc += cube[:, :, lab, :]
        out = acc
    else:
        raise ValueError(f"unknown op {op!r}")
    return out.reshape(rows, before * after)


class StateSpace:
    """Per-(n, num_labels) subset enumeration and level transition tables.

    Built lazily one level at a time; all returned arrays are read-only and
    safe to share.
    """

    def __init__(self, n: int, num_labels: int):
        self.n = n
        self.num_labels = num_labels
        self._masks: dict[int, np.ndarray] = {}
        self._items: dict[int, np.ndarray] = {}
        self._child: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def level_size(self, m: int) -> int:
        return math.comb(self.n, m) * self.num_labels**m

    def masks(self, m: int) -> np.ndarray:
        """Bitmasks of all m-item subsets, ascending."""
        if m not in self._masks:
            ms = np.sort(
                np.fromiter(
                    (sum(1 << i for i in combo) for combo in combinations(range(self.n), m)),
                    dtype=np.int64,
                    count=math.comb(self.n, m),
                )
            )
            ms.flags.writeable = False
            self._masks[m] = ms
        return self._masks[m]

    def items(self, m: int) -> np.ndarray:
        """(C(n, m), m) sorted item indices per subset row."""
        if m not in self._items:
            masks = self.masks(m)
            out = np.empty((masks.size, m), dtype=np.int8)
            for r, mask in enumerate(masks):
                out[r] = [i for i in range(self.n) if mask >> i & 1]
            out.flags.writeable = False
            self._items[m] = out
        return self._items[m]

    def rank(self, m: int, mask: int) -> int:
        masks = self.masks(m)
        r = int(np.searchsorted(masks, mask))
        if r >= masks.size or masks[r] != mask:
            raise KeyError(f"mask {mask:#x} is not a {m}-subset")
        return r

    def child_tables(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Transitions from level m to m+1.

        Returns (child_row, child_pos), both (C(n, m), n): adding item j to
        row r's subset lands at level-(m+1) row child_row[r, j], where j sits
        at digit position child_pos[r, j]; child_row is -1 when j is already
        in the subset.
        """
        if m not in self._child:
            masks = self.masks(m)
            nxt = self.masks(m + 1)
            bits = np.int64(1) << np.arange(self.n, dtype=np.int64)
            member = (masks[:, None] & bits[None, :]) != 0
            childmask = masks[:, None] | bits[None, :]
            row = np.searchsorted(nxt, childmask).astype(np.int32)
            row[member] = -1
            below = masks[:, None] & (bits[None, :] - 1)
            pos = _popcount(below).astype(np.int8)
            row.flags.writeable = False
            pos.flags.writeable = False
            self._child[m] = (row, pos)
        return self._child[m]

    def pattern_of_codes(self, items: np.ndarray) -> np.ndarray:
        """Pattern index of every config code for one sorted item subset."""
        m = len(items)
        D = digit_matrix(self.n, self.num_labels)
        w = pattern_weights(m, self.num_labels)
        return D[:, list(items)].astype(np.int64) @ w


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x)


_SPACES: dict[tuple[int, int], StateSpace] = {}


def state_space(n: int, num_labels: int) -> StateSpace:
    key = (n, num_labels)
    if key not in _SPACES:
        _SPACES[key] = StateSpace(n, num_labels)
    return _SPACES[key]
