"""Command-line surface: simulate, bounds, posterior, tree, pc, verify.

Exit codes: 0 success, 1 validation/usage error, 2 invariant violation,
3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .bounds import BoundReport, bound_report
from .errors import InvariantViolation, ValidationError
from .harness import (
    POSTERIOR_COLUMNS,
    emit_results,
    run_scenarios,
    write_csv,
)
from .model import (
    LabelConfig,
    default_scenarios,
    load_graph,
    load_scenarios,
    scenario_to_dict,
)
from .oracle import run_verification
from .policy import BINARY, al_gain, build_plan, pc_ssp
from .posterior import compute_posterior, is_permutation_invariant

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INVARIANT = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    """argparse with exit code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="alq", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_sim = sub.add_parser("simulate", help="run Monte Carlo scenarios")
    p_sim.add_argument("--config", help="scenario JSON file")
    p_sim.add_argument("--out", help="output directory")
    p_sim.add_argument("--seed", type=int, help="override every scenario seed")
    p_sim.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sim.add_argument("--threads", type=int, default=1)
    p_sim.add_argument(
        "--posteriors", action="store_true",
        help="also dump the first realization's ordered posterior per scenario",
    )
    p_sim.add_argument(
        "--print-default-config", action="store_true",
        help="print the three stock scenarios as JSON and exit",
    )

    p_bounds = sub.add_parser("bounds", help="bound report for one graph")
    p_bounds.add_argument("--graph", required=True)
    p_bounds.add_argument("--m-max", type=int, required=True)
    p_bounds.add_argument("--out", required=True)
    p_bounds.add_argument("--format", choices=("csv", "json"), default="csv")

    p_post = sub.add_parser("posterior", help="ordered posterior as CSV")
    p_post.add_argument("--graph", required=True)
    p_post.add_argument("--out", required=True)
    p_post.add_argument("--top", type=int, help="keep only the top K rows")

    p_tree = sub.add_parser("tree", help="realized decision tree as JSON")
    p_tree.add_argument("--graph", required=True)
    p_tree.add_argument("--m", type=int, required=True)
    p_tree.add_argument("--out", required=True)

    p_pc = sub.add_parser("pc", help="success probability of the optimal policy")
    p_pc.add_argument("--graph", required=True)
    p_pc.add_argument("--m", type=int, required=True)

    p_verify = sub.add_parser("verify", help="brute-force cross-checks")
    p_verify.add_argument("--trials", type=int, default=50)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--max-n", type=int, default=5)
    p_verify.add_argument("--max-m", type=int, default=2)

    return parser


def _cmd_simulate(args) -> int:
    if args.print_default_config:
        doc = {"scenarios": [scenario_to_dict(c) for c in default_scenarios()]}
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    if not args.config or not args.out:
        raise ValidationError("simulate needs --config and --out")
    scenarios = load_scenarios(args.config)
    if args.seed is not None:
        scenarios = [dataclasses.replace(c, seed=args.seed) for c in scenarios]
    results = run_scenarios(
        scenarios, threads=args.threads, dump_posterior=args.posteriors
    )
    for path in emit_results(
        results, args.out, fmt=args.format, include_posteriors=args.posteriors
    ):
        print(path)
    return EXIT_OK


def _cmd_bounds(args) -> int:
    params, obs = load_graph(args.graph)
    if not 0 <= args.m_max <= params.n:
        raise ValidationError("--m-max must be in [0, n]")
    table = compute_posterior(params, obs)
    perm = is_permutation_invariant(table)
    reports = []
    for m in range(args.m_max, -1, -1):
        pc = pc_ssp(build_plan(table, m, BINARY))
        reports.append(bound_report(table, m, pc, perm_invariant=perm))
    reports.reverse()
    for rep in reports:
        rep.check()
    if args.format == "csv":
        write_csv(
            args.out, list(BoundReport.FIELDS), [rep.to_dict() for rep in reports]
        )
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump([rep.to_dict() for rep in reports], fh, indent=2)
            fh.write("\n")
    print(args.out)
    return EXIT_OK


def _cmd_posterior(args) -> int:
    params, obs = load_graph(args.graph)
    table = compute_posterior(params, obs)
    sorted_probs = table.probs[table.order]
    phi = sorted_probs / sorted_probs[0]
    top = args.top if args.top is not None else table.num_configs
    rows = []
    for rank, (code, p, f) in enumerate(zip(table.order, sorted_probs, phi), 1):
        if rank > top:
            break
        rows.append(
            {
                "rank": rank,
                "code": int(code),
                "labels": str(LabelConfig(int(code), table.n, table.num_labels)),
                "posterior": float(p),
                "phi": float(f),
            }
        )
    write_csv(args.out, POSTERIOR_COLUMNS[2:], rows)
    print(args.out)
    return EXIT_OK


def _cmd_tree(args) -> int:
    params, obs = load_graph(args.graph)
    table = compute_posterior(params, obs)
    plan = build_plan(table, args.m, BINARY)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(plan.realized_tree(), fh, indent=2)
        fh.write("\n")
    print(args.out)
    return EXIT_OK


def _cmd_pc(args) -> int:
    params, obs = load_graph(args.graph)
    table = compute_posterior(params, obs)
    pc = pc_ssp(build_plan(table, args.m, BINARY))
    print(f"pc_ssp {pc!r}")
    print(f"gain {al_gain(table, pc)!r}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    result = run_verification(
        trials=args.trials, seed=args.seed, max_n=args.max_n, max_m=args.max_m
    )
    for line in result.summary_lines():
        print(line)
    if not result.ok:
        raise InvariantViolation(f"{len(result.failures)} oracle mismatches")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "bounds": _cmd_bounds,
    "posterior": _cmd_posterior,
    "tree": _cmd_tree,
    "pc": _cmd_pc,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION
    try:
        return _COMMANDS[args.command](args)
    except InvariantViolation as exc:
        print(f"alq: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValidationError, ValueError) as exc:
        print(f"alq: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"alq: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
