"""Exact posterior over all label configurations, ordering, and marginals.

All probability arithmetic runs in log space with log-sum-exp; exponentiated
values are exposed where callers need linear-scale masses.
"""

from __future__ import annotations

from itertools import permutations
from typing import Mapping

import numpy as np

from .errors import ValidationError, ZeroMassError
from .model import LabelConfig, Observation, SbmParams
from .states import digit_matrix


def logsumexp(x: np.ndarray) -> float:
    """Stable log(sum(exp(x))) for a 1-D array; -inf entries contribute 0."""
    x = np.asarray(x, dtype=np.float64)
    m = np.max(x) if x.size else -np.inf
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(x - m))))


class PosteriorTable:
    """Posterior log-probabilities over all ``num_labels**n`` configurations.

    ``order`` lists configuration codes by descending posterior, ties broken
    by ascending code, so ``order[0]`` is the MAP configuration.
    """

    def __init__(self, log_probs: np.ndarray, n: int, num_labels: int):
        log_probs = np.asarray(log_probs, dtype=np.float64)
        if log_probs.shape != (num_labels**n,):
            raise ValidationError("log_probs length must be num_labels**n")
        total = np.exp(logsumexp(log_probs))
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"posterior sums to {total!r}, expected 1")
        self.n = n
        self.num_labels = num_labels
        self.log_probs = log_probs.copy()
        self.log_probs.flags.writeable = False
        # Stable sort on the negated values keeps equal posteriors in
        # ascending code order.
        self.order = np.argsort(-self.log_probs, kind="stable").astype(np.int64)
        self.order.flags.writeable = False
        self._probs: np.ndarray | None = None
        self._cache: dict = {}

    @classmethod
    def from_probs(cls, probs, n: int, num_labels: int) -> "PosteriorTable":
        probs = np.asarray(probs, dtype=np.float64).copy()
        with np.errstate(divide="ignore"):
            table = cls(np.log(probs), n=n, num_labels=num_labels)
        # Keep the caller's linear values verbatim rather than exp(log(p)).
        probs.flags.writeable = False
        table._probs = probs
        return table

    @property
    def num_configs(self) -> int:
        return self.num_labels**self.n

    @property
    def probs(self) -> np.ndarray:
        if self._probs is None:
            p = np.exp(self.log_probs)
            p.flags.writeable = False
            self._probs = p
        return self._probs

    @property
    def map_code(self) -> int:
        return int(self.order[0])

    @property
    def map_prob(self) -> float:
        return float(self.probs[self.map_code])

    def config(self, code: int) -> LabelConfig:
        return LabelConfig(code=int(code), n=self.n, num_labels=self.num_labels)

    def digits(self) -> np.ndarray:
        return digit_matrix(self.n, self.num_labels)

    def consistent_mask(self, revealed: Mapping[int, int]) -> np.ndarray:
        """Boolean mask of configurations agreeing with a partial labeling."""
        _check_revealed(self, revealed)
        D = self.digits()
        mask = np.ones(self.num_configs, dtype=bool)
        for item, label in revealed.items():
            mask &= D[:, item] == label
        return mask


def _check_revealed(table: PosteriorTable, revealed: Mapping[int, int]) -> None:
    for item, label in revealed.items():
        if not 0 <= item < table.n:
            raise ValidationError(f"item {item} out of range")
        if not 0 <= label < table.num_labels:
            raise ValidationError(f"label {label} out of range")


def compute_posterior(params: SbmParams, obs: Observation) -> PosteriorTable:
    """Exact Bayes posterior: prior times pairwise likelihood, normalized.

    The likelihood over all configurations is assembled from two per-config
    pair counts (same-label pairs, and same-label pairs with an edge), since
    every pair's factor is one of four values.
    """
    if obs.n != params.n:
        raise ValidationError("observation size does not match params")
    n, L = params.n, params.num_labels
    D = digit_matrix(n, L)
    K = params.num_configs
    same_total = np.zeros(K, dtype=np.int32)
    same_edge = np.zeros(K, dtype=np.int32)
    num_pairs = 0
    num_edges = len(obs.edges)
    for i, j in params.pairs():
        num_pairs += 1
        eq = D[:, i] == D[:, j]
        same_total += eq
        if (i, j) in obs.edges:
            same_edge += eq
    log_qin = np.log(params.q_in)
    log_1qin = np.log1p(-params.q_in)
    log_qout = np.log(params.q_out)
    log_1qout = np.log1p(-params.q_out)
    loglik = (
        same_edge * log_qin
        + (same_total - same_edge) * log_1qin
        + (num_edges - same_edge) * log_qout
        + (num_pairs - same_total - num_edges + same_edge) * log_1qout
    )
    if params.uniform_prior:
        log_prior = np.full(K, -n * np.log(L))
    else:
        with np.errstate(divide="ignore"):
            lp = np.log(np.asarray(params.label_prior, dtype=np.float64))
        log_prior = np.zeros(K, dtype=np.float64)
        for i in range(n):
            log_prior += lp[D[:, i]]
    unnorm = log_prior + loglik
    log_z = logsumexp(unnorm)
    return PosteriorTable(unnorm - log_z, n=n, num_labels=L)


def normalized_accuracy(table: PosteriorTable, code: int | LabelConfig) -> float:
    """Posterior of a configuration divided by the MAP posterior."""
    if isinstance(code, LabelConfig):
        code = code.code
    if not 0 <= code < table.num_configs:
        raise ValidationError(f"code {code} out of range")
    return float(table.probs[code] / table.map_prob)


def conditional_label_dist(
    table: PosteriorTable, revealed: Mapping[int, int], item: int
) -> np.ndarray:
    """Marginal distribution of one item's label given revealed labels."""
    if item in revealed:
        raise ValidationError(f"item {item} is already revealed")
    if not 0 <= item < table.n:
        raise ValidationError(f"item {item} out of range")
    mask = table.consistent_mask(revealed)
    D = table.digits()
    log_masses = np.empty(table.num_labels)
    for lab in range(table.num_labels):
        log_masses[lab] = logsumexp(table.log_probs[mask & (D[:, item] == lab)])
    total = logsumexp(log_masses)
    if not np.isfinite(total):
        raise ZeroMassError("revealed labels have zero posterior mass")
    return np.exp(log_masses - total)


def max_joint_consistent(
    table: PosteriorTable, revealed: Mapping[int, int]
) -> tuple[float, LabelConfig]:
    """Largest posterior among configurations agreeing with ``revealed``,
    with the smallest-code argmax."""
    mask = table.consistent_mask(revealed)
    masked = np.where(mask, table.probs, -1.0)
    code = int(np.argmax(masked))  # first occurrence = smallest code on ties
    value = float(masked[code])
    if value < 0.0:
        raise ValidationError("revealed labels are inconsistent")
    return value, table.config(code)


def is_permutation_invariant(table: PosteriorTable, tol: float = 1e-9) -> bool:
    """True iff relabeling classes by any permutation leaves every posterior
    value unchanged within ``tol``."""
    L = table.num_labels
    D = table.digits()
    weights = L ** np.arange(table.n - 1, -1, -1, dtype=np.int64)
    probs = table.probs
    for sigma in permutations(range(L)):
        if sigma == tuple(range(L)):
            continue
        sig = np.asarray(sigma, dtype=np.int64)
        permuted_codes = sig[D.astype(np.int64)] @ weights
        if np.max(np.abs(probs - probs[permuted_codes])) > tol:
            return False
    return True
