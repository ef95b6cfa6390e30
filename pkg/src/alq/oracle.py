"""Brute-force reference implementations, kept deliberately naive.

Nothing here shares machinery with the main paths: posteriors come from
direct probability products (no log space, no pair-count factoring), and
policy values come from explicit enumeration of every deterministic adaptive
policy (no subset memoization). Scans accumulate in ascending configuration
code / ascending label / ascending item order, the same conventions the
optimized code follows, so agreement is required to be exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product

from .bounds import big_gamma_witness, theorem4_bounds
from .errors import ValidationError
from .model import Observation, SbmParams, rng_stream, sample_labels, sample_observation
from .posterior import PosteriorTable, compute_posterior
from .policy import BINARY, HAMMING, LossFunction, build_plan, pc_batch, pc_ssp

BRUTE_POSTERIOR_CAP_N = 4
POLICY_ENUM_CAP_N = 5
POLICY_ENUM_CAP_M = 2


def _label_of(code: int, item: int, n: int, num_labels: int) -> int:
    return (code // num_labels ** (n - 1 - item)) % num_labels


def _consistent(code: int, revealed: dict, n: int, num_labels: int) -> bool:
    return all(
        _label_of(code, i, n, num_labels) == lab for i, lab in revealed.items()
    )


def brute_posterior(params: SbmParams, obs: Observation) -> list[float]:
    """Posterior by direct products of plain probabilities, per configuration."""
    if params.n > BRUTE_POSTERIOR_CAP_N:
        raise ValidationError(
            f"brute posterior capped at n <= {BRUTE_POSTERIOR_CAP_N}"
        )
    n, L = params.n, params.num_labels
    weights = []
    for code in range(L**n):
        labels = [_label_of(code, i, n, L) for i in range(n)]
        w = 1.0
        for i in range(n):
            w *= params.label_prior[labels[i]]
        for i in range(n):
            for j in range(i + 1, n):
                delta = params.q_in if labels[i] == labels[j] else params.q_out
                w *= delta if obs.has_edge(i, j) else (1.0 - delta)
        weights.append(w)
    total = math.fsum(weights)
    return [w / total for w in weights]


# ---------------------------------------------------------------------------
# exhaustive adaptive-policy enumeration
# ---------------------------------------------------------------------------

def enumerate_adaptive_policies(
    table: PosteriorTable, m_budget: int, loss: LossFunction
):
    """Best value over every deterministic adaptive policy, plus one optimum.

    A policy assigns a next item to each (queried items, revealed labels)
    history node of the depth-M tree. Values are the correct-classification
    probability (binary loss, maximized) or the mass-weighted expected
    mismatch count (hamming loss, minimized).

    Returns (value, policy) where a policy is None at depth M or a pair
    (item, per-label subpolicies).
    """
    n, L = table.n, table.num_labels
    if n > POLICY_ENUM_CAP_N or m_budget > POLICY_ENUM_CAP_M:
        raise ValidationError(
            f"policy enumeration capped at n <= {POLICY_ENUM_CAP_N}, "
            f"M <= {POLICY_ENUM_CAP_M}"
        )
    if m_budget > n:
        raise ValidationError("budget exceeds item count")
    probs = [float(p) for p in table.probs]

    def leaf_pc(revealed: dict) -> float:
        best = -1.0
        for code in range(L**n):
            if _consistent(code, revealed, n, L) and probs[code] > best:
                best = probs[code]
        return best

    def leaf_risk(revealed: dict) -> float:
        mass = 0.0
        for code in range(L**n):
            if _consistent(code, revealed, n, L):
                mass += probs[code]
        acc = 0.0
        for i in range(n):
            if i in revealed:
                continue
            best = -1.0
            for lab in range(L):
                sub = 0.0
                for code in range(L**n):
                    if (
                        _consistent(code, revealed, n, L)
                        and _label_of(code, i, n, L) == lab
                    ):
                        sub += probs[code]
                if sub > best:
                    best = sub
            acc += mass - best
        return acc

    leaf_value = leaf_pc if loss.kind == "binary" else leaf_risk

    def policies(queried: tuple[int, ...], depth: int):
        if depth == m_budget:
            yield None
            return
        for j in range(n):
            if j in queried:
                continue
            subs = list(policies(queried + (j,), depth + 1))
            for combo in product(subs, repeat=L):
                yield (j, combo)

    def evaluate(policy, revealed: dict) -> float:
        if policy is None:
            return leaf_value(revealed)
        j, children = policy
        total = 0.0
        for lab in range(L):
            total += evaluate(children[lab], {**revealed, j: lab})
        return total

    better = (lambda a, b: a > b) if loss.kind == "binary" else (lambda a, b: a < b)
    best_value = None
    best_policy = None
    for policy in policies((), 0):
        value = evaluate(policy, {})
        if best_value is None or better(value, best_value):
            best_value, best_policy = value, policy
    return best_value, best_policy


def best_batch_gamma_policy(
    table: PosteriorTable, m_budget: int
) -> tuple[tuple[int, ...], float]:
    """Batch policy over the witness subset of the separable-prefix search.

    Its success probability is at least the sum of the witness-separable
    largest posteriors, realizing the gain lower bound constructively.
    """
    if m_budget > table.n:
        raise ValidationError("budget exceeds item count")
    _, items = big_gamma_witness(table, m_budget)
    n, L = table.n, table.num_labels
    best: dict[tuple, float] = {}
    for code in range(L**n):
        pat = tuple(_label_of(code, i, n, L) for i in items)
        p = float(table.probs[code])
        if pat not in best or p > best[pat]:
            best[pat] = p
    return tuple(items), math.fsum(best.values())


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------

@dataclass
class VerifyResult:
    trials: int
    checks: dict[str, int] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def _count(self, name: str) -> None:
        self.checks[name] = self.checks.get(name, 0) + 1

    def summary_lines(self) -> list[str]:
        lines = [f"{'check':<28}{'runs':>8}"]
        for name in sorted(self.checks):
            lines.append(f"{name:<28}{self.checks[name]:>8}")
        lines.append(
            f"{self.trials} trials, {len(self.failures)} failures: "
            + ("OK" if self.ok else "MISMATCH")
        )
        lines.extend(self.failures[:20])
        return lines


def _random_instance(rng, max_n: int) -> tuple[SbmParams, Observation, PosteriorTable]:
    n = int(rng.integers(2, max_n + 1))
    num_labels = 2 if n > 4 or rng.random() < 0.6 else 3
    q_out = float(rng.uniform(0.02, 0.45))
    q_in = float(rng.uniform(q_out + 0.05, 0.97))
    params = SbmParams(n=n, num_labels=num_labels, q_in=q_in, q_out=q_out)
    seed = int(rng.integers(0, 2**32))
    labels = sample_labels(params, rng_stream(seed, 0))
    obs = sample_observation(params, labels, rng_stream(seed, 1))
    return params, obs, compute_posterior(params, obs)


def run_verification(
    trials: int, seed: int, max_n: int = 5, max_m: int = 2
) -> VerifyResult:
    """Cross-check optimized paths against the brute-force references."""
    max_n = min(max_n, POLICY_ENUM_CAP_N)
    max_m = min(max_m, POLICY_ENUM_CAP_M)
    result = VerifyResult(trials=trials)
    rng = rng_stream(seed, 0)
    for trial in range(trials):
        params, obs, table = _random_instance(rng, max_n)
        n = params.n
        tag = f"trial {trial} (n={n}, L={params.num_labels})"

        if n <= BRUTE_POSTERIOR_CAP_N:
            result._count("posterior_vs_brute")
            ref = brute_posterior(params, obs)
            for code, p_ref in enumerate(ref):
                p = float(table.probs[code])
                if abs(p - p_ref) > 1e-12 * max(p_ref, 1e-300):
                    result.failures.append(
                        f"{tag} code {code}: posterior {p!r} vs brute {p_ref!r}"
                    )
                    break
        for m_budget in range(0, min(max_m, n) + 1):
            plan = build_plan(table, m_budget, BINARY)
            oracle_pc, _ = enumerate_adaptive_policies(table, m_budget, BINARY)
            result._count("policy_enum_binary")
            if plan.root_value != oracle_pc:
                result.failures.append(
                    f"{tag} M={m_budget} binary: dp={plan.root_value!r} "
                    f"oracle={oracle_pc!r}"
                )
            risk_plan = build_plan(table, m_budget, HAMMING)
            oracle_risk, _ = enumerate_adaptive_policies(table, m_budget, HAMMING)
            result._count("policy_enum_hamming")
            if risk_plan.root_value != oracle_risk:
                result.failures.append(
                    f"{tag} M={m_budget} hamming: dp={risk_plan.root_value!r} "
                    f"oracle={oracle_risk!r}"
                )
            # Batch policies can never beat the adaptive optimum.
            result._count("batch_dominance")
            adaptive = pc_ssp(plan)
            for items in combinations(range(n), m_budget):
                if pc_batch(table, items) > adaptive + 1e-12:
                    result.failures.append(
                        f"{tag} M={m_budget}: batch {items} beats adaptive"
                    )
            items, witness_pc = best_batch_gamma_policy(table, m_budget)
            lb_gain, _ = theorem4_bounds(table, m_budget)
            result._count("gamma_witness")
            if witness_pc < lb_gain * table.map_prob - 1e-12:
                result.failures.append(
                    f"{tag} M={m_budget}: witness pc {witness_pc!r} below "
                    f"prefix sum {lb_gain * table.map_prob!r}"
                )
    return result
