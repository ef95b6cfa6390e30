"""Renyi-entropy machinery and bounds on the query cost-performance tradeoff.

Four bounds are computed per budget M:

* an entropy upper bound on the success probability, optimized over a
  transformed order parameter;
* an iterative entropy lower bound built from successive lower bounds on the
  ordered posterior values;
* ordered-posterior lower and upper bounds on the active-learning gain, the
  lower one driven by the largest separable prefix of ordered configurations.

Both infima are discretized on grids. A grid infimum can only overestimate
the true infimum, which loosens the bounds on their safe sides, so
discretization never produces an invalid sandwich.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, ValidationError
from .posterior import PosteriorTable, logsumexp
from .states import digit_matrix, state_space

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AlphaGrid:
    """Search grids for the two entropy-bound infima.

    The upper bound is searched in beta = alpha/(alpha+1) space, where
    alpha in (-inf, -1) maps to beta in (1, inf); a log-spaced grid plus
    golden-section refinement covers (1, beta_max]. The lower bound's inner
    infimum over alpha in (1, inf) uses a log-spaced grid only.

    beta_max defaults high enough (1e4) that the near--1 limit of the upper
    bound is resolved to about 2e-4 relative.
    """

    beta_lo: float = 1.0 + 1e-6
    beta_max: float = 1e4
    beta_points: int = 200
    alpha_lo: float = 1.0 + 1e-6
    alpha_max: float = 1e4
    alpha_points: int = 200
    refine_rel_tol: float = 1e-6

    def __post_init__(self) -> None:
        if not 1.0 < self.beta_lo < self.beta_max:
            raise ValidationError("need 1 < beta_lo < beta_max")
        if not 1.0 < self.alpha_lo < self.alpha_max:
            raise ValidationError("need 1 < alpha_lo < alpha_max")
        if self.beta_points < 2 or self.alpha_points < 2:
            raise ValidationError("grids need at least 2 points")

    def betas(self) -> np.ndarray:
        return np.geomspace(self.beta_lo, self.beta_max, self.beta_points)

    def alphas(self) -> np.ndarray:
        return np.geomspace(self.alpha_lo, self.alpha_max, self.alpha_points)

    def to_dict(self) -> dict:
        return {
            "beta_lo": self.beta_lo,
            "beta_max": self.beta_max,
            "beta_points": self.beta_points,
            "alpha_lo": self.alpha_lo,
            "alpha_max": self.alpha_max,
            "alpha_points": self.alpha_points,
            "refine_rel_tol": self.refine_rel_tol,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AlphaGrid":
        return cls(**{k: v for k, v in doc.items()})


DEFAULT_GRID = AlphaGrid()


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------

def renyi_entropy(dist, alpha: float) -> float:
    """Entropy of order alpha: log(sum p**alpha) / (1 - alpha), in nats.

    Zero-probability atoms contribute nothing for alpha > 0. alpha must not
    equal 1; callers wanting the Shannon value take the limit themselves.
    """
    if alpha == 1.0:
        raise ValidationError("alpha = 1 is the Shannon limit; not defined here")
    p = np.asarray(dist, dtype=np.float64)
    if p.ndim != 1:
        raise ValidationError("dist must be one-dimensional")
    if np.any(p < 0.0):
        raise ValidationError("probabilities must be nonnegative")
    if abs(float(np.sum(p)) - 1.0) > 1e-9:
        raise ValidationError("dist must sum to 1 within 1e-9")
    if alpha <= 0.0 and np.any(p == 0.0):
        raise ValidationError("zero atoms are not allowed for alpha <= 0")
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    return logsumexp(alpha * logp) / (1.0 - alpha)


def conditional_event_renyi(table: PosteriorTable, alpha: float) -> float:
    """Entropy of order alpha of the posterior given the observed event."""
    if alpha == 1.0:
        raise ValidationError("alpha = 1 is the Shannon limit; not defined here")
    return logsumexp(alpha * table.log_probs) / (1.0 - alpha)


def arimoto_conditional_entropy(joint, alpha: float) -> float:
    """Order-alpha conditional entropy of X given Y from a joint pmf.

    ``joint[x, y]`` is the joint mass; the average over Y uses the
    alpha/(1-alpha) log-mean of per-event exponentials. Provided as a
    utility; the bounds above condition on a single observed event.
    """
    if alpha == 1.0:
        raise ValidationError("alpha = 1 is the Shannon limit; not defined here")
    pxy = np.asarray(joint, dtype=np.float64)
    if pxy.ndim != 2 or np.any(pxy < 0.0):
        raise ValidationError("joint must be a nonnegative matrix")
    if abs(float(pxy.sum()) - 1.0) > 1e-9:
        raise ValidationError("joint must sum to 1 within 1e-9")
    py = pxy.sum(axis=0)
    terms = []
    for y in range(pxy.shape[1]):
        if py[y] == 0.0:
            continue
        h_y = renyi_entropy(pxy[:, y] / py[y], alpha)
        terms.append(math.log(py[y]) + (1.0 - alpha) / alpha * h_y)
    return alpha / (1.0 - alpha) * logsumexp(np.asarray(terms))


# ---------------------------------------------------------------------------
# upper bound on the success probability
# ---------------------------------------------------------------------------

def _golden_min(f, lo: float, hi: float, rel_tol: float) -> float:
    """Golden-section minimum of f on [lo, hi]; returns the best f seen."""
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    best = min(f(lo), f(hi), f1, f2)
    while (hi - lo) > rel_tol * max(abs(lo), abs(hi), 1.0):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
        best = min(best, f1, f2)
    return best


def theorem2_upper_bound(
    table: PosteriorTable, m_budget: int, grid: AlphaGrid | None = None
) -> float:
    """Entropy upper bound on the optimal policy's success probability.

    In beta space the objective is
    (log sum p**beta + (beta - 1) * M * log L) / beta, minimized over
    beta > 1; the bound is exp of the infimum, clamped to 1.
    """
    if m_budget < 0:
        raise ValidationError("budget must be nonnegative")
    grid = grid or DEFAULT_GRID
    logp = table.log_probs
    m_bits = m_budget * math.log(table.num_labels)

    def objective(beta: float) -> float:
        return (logsumexp(beta * logp) + (beta - 1.0) * m_bits) / beta

    betas = grid.betas()
    vals = np.array([objective(b) for b in betas])
    i = int(np.argmin(vals))
    lo = betas[max(i - 1, 0)]
    hi = betas[min(i + 1, betas.size - 1)]
    # Search in log(beta); the tolerance is relative on beta.
    refined = _golden_min(
        lambda u: objective(math.exp(u)),
        math.log(lo),
        math.log(hi),
        grid.refine_rel_tol,
    )
    return min(1.0, math.exp(min(float(vals[i]), refined)))


# ---------------------------------------------------------------------------
# iterative lower bound on the success probability
# ---------------------------------------------------------------------------

def gamma(num_labels: int, m_budget: int, perm_invariant: bool) -> int:
    """Number of ordered-posterior terms the lower bound may claim.

    For label-permutation-invariant posteriors: L! * (M - L + 2) once
    M >= L - 1, else L! / (L - M)!. For arbitrary posteriors: M + 1.
    """
    if m_budget < 0:
        raise ValidationError("budget must be nonnegative")
    if not perm_invariant:
        return m_budget + 1
    lf = math.factorial(num_labels)
    if m_budget >= num_labels - 1:
        return lf * (m_budget - num_labels + 2)
    return lf // math.factorial(num_labels - m_budget)


def theorem3_lower_bound(
    table: PosteriorTable,
    m_budget: int,
    perm_invariant: bool,
    grid: AlphaGrid | None = None,
) -> float:
    """Iterative entropy lower bound on the optimal policy's success probability.

    Each round lower-bounds the next ordered posterior value through the
    entropy of the residual distribution; rounds stop once the provable mass
    is exhausted (nonpositive log argument or empty feasible grid).
    """
    if m_budget < 0:
        raise ValidationError("budget must be nonnegative")
    grid = grid or DEFAULT_GRID
    n_terms = min(gamma(table.num_labels, m_budget, perm_invariant),
                  table.num_configs)
    alphas = grid.alphas()
    logp = table.log_probs
    log_s = np.array([logsumexp(a * logp) for a in alphas])
    max_entropy = table.n * math.log(table.num_labels)

    b_values: list[float] = []
    log_b: list[float] = []
    cum = 0.0
    for _ in range(n_terms):
        if cum >= 1.0 - 1e-15:
            break
        log1mcum = math.log1p(-cum)
        if log_b:
            lb = np.asarray(log_b)
            log_delta = np.array([logsumexp(a * lb) for a in alphas])
        else:
            log_delta = np.full(alphas.shape, -np.inf)
        with np.errstate(invalid="ignore", over="ignore"):
            gap = log_delta - log_s
            valid = (log_s > log_delta) & np.isfinite(log_s)
            log_arg = np.where(
                valid, log_s + np.log1p(-np.exp(np.where(valid, gap, -np.inf))),
                np.nan,
            )
            h = (log_arg - alphas * log1mcum) / (1.0 - alphas)
            valid &= np.isfinite(h) & (h >= 0.0) & (h <= max_entropy + 1e-9)
            # floor with a one-ulp cushion; the bound is continuous across
            # integer boundaries, so the cushion cannot flip its validity
            k = np.floor(np.exp(np.where(valid, h, 0.0)) + 1e-12)
            k = np.maximum(k, 1.0)
            h_cal = np.exp(np.where(valid, log_arg, 0.0) / alphas - log1mcum)
            inv_a = 1.0 / alphas
            t_k = np.exp(inv_a * np.log(k))        # k ** (1/alpha)
            t_k1 = np.exp(inv_a * np.log(k + 1.0))  # (k+1) ** (1/alpha)
            den = k * t_k1 - t_k * (k + 1.0)
            if np.any(valid & (den >= 0.0)):
                raise InvariantViolation(
                    "ratio denominator must be negative for alpha > 1"
                )
            num = h_cal - t_k * k + (k - 1.0) * t_k1
            ratio = np.where(valid, num / den, np.inf)
        if not np.any(valid):
            break
        inf_ratio = float(np.min(ratio[valid]))
        flb = 1.0 - inf_ratio
        if flb <= 0.0:
            break
        b = flb * (1.0 - cum)
        b_values.append(b)
        log_b.append(math.log(b))
        cum += b
    return min(1.0, float(sum(b_values)))


# ---------------------------------------------------------------------------
# ordered-posterior gain bounds
# ---------------------------------------------------------------------------

def big_gamma(table: PosteriorTable, m_budget: int) -> int:
    """Largest prefix of ordered configurations separable by some M-item set."""
    return big_gamma_witness(table, m_budget)[0]


def big_gamma_witness(
    table: PosteriorTable, m_budget: int
) -> tuple[int, tuple[int, ...]]:
    """As ``big_gamma``, also returning one M-item witness subset.

    A subset separates a prefix when the prefix configurations restrict to
    pairwise-distinct label patterns on it. For each subset the longest
    separable prefix ends right before the first duplicated pattern, and the
    answer is the maximum over subsets. The scan is capped at L**M patterns
    (no subset can separate more) and at the number of configurations with
    posterior above 1e-15, beyond which further terms add nothing.
    """
    if m_budget < 0:
        raise ValidationError("budget must be nonnegative")
    n, L = table.n, table.num_labels
    if m_budget > n:
        raise ValidationError(f"budget {m_budget} exceeds item count {n}")
    default_witness = tuple(range(m_budget))
    if m_budget == 0:
        return 1, ()
    significant = int(np.sum(table.probs[table.order] > 1e-15))
    cap = min(L**m_budget, table.num_configs, max(significant, 1))
    if cap <= 1:
        return 1, default_witness
    space = state_space(n, L)
    items = space.items(m_budget)
    top = digit_matrix(n, L)[table.order[:cap]].astype(np.int64)
    weights = L ** np.arange(m_budget - 1, -1, -1, dtype=np.int64)
    w_mat = np.zeros((n, items.shape[0]), dtype=np.int64)
    for k in range(m_budget):
        w_mat[items[:, k], np.arange(items.shape[0])] = weights[k]
    pats = (top @ w_mat).T  # (subsets, cap)
    idx = np.argsort(pats, axis=1, kind="stable")
    srt = np.take_along_axis(pats, idx, axis=1)
    dup = srt[:, 1:] == srt[:, :-1]
    first_dup = np.where(dup, idx[:, 1:], cap).min(axis=1)
    best = int(np.argmax(first_dup))
    return int(first_dup[best]), tuple(int(i) for i in items[best])


def theorem4_bounds(table: PosteriorTable, m_budget: int) -> tuple[float, float]:
    """(lower, upper) bounds on the active-learning gain from ordered
    normalized accuracies: the separable-prefix sum and the L**M-term sum."""
    if m_budget < 0:
        raise ValidationError("budget must be nonnegative")
    sorted_probs = table.probs[table.order]
    phi = sorted_probs / sorted_probs[0]
    gamma_cap = big_gamma(table, m_budget)
    upper_terms = min(table.num_labels**m_budget, table.num_configs)
    return float(np.sum(phi[:gamma_cap])), float(np.sum(phi[:upper_terms]))


# ---------------------------------------------------------------------------
# per-budget report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """Exact success probability and every bound for one query budget."""

    M: int
    pc_exact: float
    ub_thm2: float
    lb_thm3: float
    lb_thm4: float
    ub_thm4: float
    gain: float
    gain_ceiling: float
    gamma_used: int
    big_gamma: int
    perm_invariant: bool

    FIELDS = (
        "M", "pc_exact", "ub_thm2", "lb_thm3", "lb_thm4", "ub_thm4",
        "gain", "gain_ceiling", "gamma_used", "big_gamma", "perm_invariant",
    )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}

    def check(self, tol: float = 1e-9) -> None:
        """Raise unless the sandwich inequalities hold (with numeric slack)."""
        problems = []
        if self.lb_thm3 > self.pc_exact + tol:
            problems.append(f"lb_thm3 {self.lb_thm3!r} > pc {self.pc_exact!r}")
        if self.pc_exact > self.ub_thm2 + tol:
            problems.append(f"pc {self.pc_exact!r} > ub_thm2 {self.ub_thm2!r}")
        if self.lb_thm4 > self.gain + tol:
            problems.append(f"lb_thm4 {self.lb_thm4!r} > gain {self.gain!r}")
        if self.gain > self.ub_thm4 + tol:
            problems.append(f"gain {self.gain!r} > ub_thm4 {self.ub_thm4!r}")
        if self.gain > self.gain_ceiling + tol:
            problems.append(
                f"gain {self.gain!r} > ceiling {self.gain_ceiling!r}"
            )
        if self.pc_exact > 1.0 + tol:
            problems.append(f"pc {self.pc_exact!r} > 1")
        if problems:
            raise InvariantViolation(
                f"bound sandwich violated at M={self.M}: " + "; ".join(problems)
            )


def bound_report(
    table: PosteriorTable,
    m_budget: int,
    pc_exact: float,
    perm_invariant: bool | None = None,
    grid: AlphaGrid | None = None,
) -> BoundReport:
    """Assemble all bounds for one budget around an exact success probability."""
    from .posterior import is_permutation_invariant

    if perm_invariant is None:
        perm_invariant = is_permutation_invariant(table)
    f1 = table.map_prob
    lb4, ub4 = theorem4_bounds(table, m_budget)
    return BoundReport(
        M=m_budget,
        pc_exact=pc_exact,
        ub_thm2=theorem2_upper_bound(table, m_budget, grid),
        lb_thm3=theorem3_lower_bound(table, m_budget, perm_invariant, grid),
        lb_thm4=lb4,
        ub_thm4=ub4,
        gain=pc_exact / f1,
        gain_ceiling=1.0 / f1,
        gamma_used=min(gamma(table.num_labels, m_budget, perm_invariant),
                       table.num_configs),
        big_gamma=big_gamma(table, m_budget),
        perm_invariant=perm_invariant,
    )
