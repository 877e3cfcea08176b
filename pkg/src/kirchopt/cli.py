"""Command-line surface: prepare, run, verify, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  The environment
variable ``KOPT_SEED`` supplies the seed when ``--seed`` is absent.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

from .graph import GraphError, largest_connected_component, load_edge_list
from .linalg import SolverError
from .optimize import ALGORITHMS, AlgoParams
from . import verify as verify_mod

USAGE_ERROR = 2
RUNTIME_ERROR = 1

ALGO_NAMES = ("deter", "grad", "approx", "fastgrad", "fastgrad+", "oneconv", "brute")


def _seed_from_env(value):
    if value is not None:
        return value
    env = os.environ.get("KOPT_SEED")
    return int(env) if env else 0


def _load_lcc(path):
    graph, report = load_edge_list(path)
    lcc = largest_connected_component(graph)
    return graph, lcc, report


def _result_payload(result):
    return {
        "algo": result.algo,
        "n": result.n,
        "m": result.m,
        "params": {
            key: val for key, val in result.params.items() if val is not None
        },
        "kirchhoff_initial": result.kirchhoff_initial,
        "kirchhoff_initial_over_n": result.kirchhoff_initial / result.n,
        "kirchhoff_estimated": result.kirchhoff_estimated,
        "steps": [
            {
                "edge": [int(u), int(v)],
                "kirchhoff": kval,
                "kirchhoff_over_n": kval / result.n,
                "elapsed_ms": 1000.0 * secs,
            }
            for (u, v), kval, secs in zip(
                result.edges, result.kirchhoff, result.step_seconds
            )
        ],
        "total_ms": 1000.0 * result.total_seconds,
        "diagnostics": result.diagnostics,
    }


def _write_result(result, output, fmt):
    if fmt == "json":
        text = json.dumps(_result_payload(result), indent=2)
        if output:
            with open(output, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return
    rows = [
        (result.algo, i + 1, u, v, kval, kval / result.n, 1000.0 * secs)
        for i, ((u, v), kval, secs) in enumerate(
            zip(result.edges, result.kirchhoff, result.step_seconds)
        )
    ]
    fh = open(output, "w", newline="") if output else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(
            ["algo", "step", "u", "v", "kirchhoff", "kirchhoff_over_n", "elapsed_ms"]
        )
        writer.writerows(rows)
    finally:
        if output:
            fh.close()


def _params_from_args(args, k=None):
    seed = _seed_from_env(args.seed)
    solver_tol = None if args.solver_gamma == "formula" else float(args.solver_gamma)
    mu, beta, delta = args.mu, args.beta, args.delta
    if args.epsilon is None and mu is None and beta is None and delta is None:
        mu, beta, delta = 0.01, 0.1, 0.1  # benchmark defaults
    return AlgoParams(
        k=k if k is not None else args.k,
        epsilon=args.epsilon,
        mu=mu,
        beta=beta,
        delta=delta,
        seed=seed,
        c_jl=args.c_jl,
        prune=not args.no_prune,
        solver_tol=solver_tol,
    )


def cmd_prepare(args):
    graph, lcc, report = _load_lcc(args.input)
    with open(args.output, "w") as fh:
        labels = lcc.original_labels
        for u, v in zip(lcc.edges_u, lcc.edges_v):
            fh.write(f"{labels[u]} {labels[v]}\n")
    dropped = report.dropped_self_loops + report.dropped_duplicates
    print(f"nodes: {lcc.n}")
    print(f"edges: {lcc.m}")
    print(f"dropped: {dropped}")
    print(f"  self-loops: {report.dropped_self_loops}")
    print(f"  duplicates: {report.dropped_duplicates}")
    print(f"component nodes kept: {lcc.n}/{graph.n}")
    return 0


def cmd_run(args):
    params = _params_from_args(args)
    _, lcc, _ = _load_lcc(args.input)
    result = ALGORITHMS[args.algo](lcc, params)
    _write_result(result, args.output, args.format)
    return 0


def cmd_verify(args):
    results = verify_mod.run_checks(args.scale)
    failed = 0
    for res in results:
        tag = "PASS" if res.passed else "FAIL"
        line = f"[{tag}] {res.name}: measured {res.measured:.6g} vs tolerance {res.tolerance:.6g}"
        if res.detail:
            line += f" ({res.detail})"
        print(line)
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else RUNTIME_ERROR


def cmd_bench(args):
    k_values = [int(tok) for tok in args.k_values.split(",")]
    algos = args.algos.split(",")
    for name in algos:
        if name not in ALGO_NAMES:
            raise GraphError(f"unknown algorithm {name!r}")
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(
            ["algo", "graph", "n", "m", "k", "k_final", "k_final_over_n", "total_ms"]
        )
        for path in args.inputs:
            try:
                _, lcc, _ = _load_lcc(path)
            except (OSError, GraphError) as exc:
                print(f"skipping {path}: {exc}", file=sys.stderr)
                continue
            for algo in algos:
                for k in k_values:
                    params = _params_from_args(args, k=k)
                    t0 = time.perf_counter()
                    try:
                        result = ALGORITHMS[algo](lcc, params)
                    except (GraphError, SolverError, ValueError) as exc:
                        print(
                            f"run failed ({algo}, {path}, k={k}): {exc}",
                            file=sys.stderr,
                        )
                        continue
                    writer.writerow([
                        algo, path, lcc.n, lcc.m, k,
                        f"{result.final_kirchhoff:.6f}",
                        f"{result.final_kirchhoff / lcc.n:.6f}",
                        f"{1000.0 * (time.perf_counter() - t0):.3f}",
                    ])
    finally:
        if args.output:
            fh.close()
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kopt",
        description="Minimize the Kirchhoff index of a graph by adding edges.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="clean an edge list and keep the largest component")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("run", help="run one selection algorithm")
    p.add_argument("--input", required=True)
    p.add_argument("--algo", required=True, choices=ALGO_NAMES)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--c-jl", type=float, default=1.0)
    p.add_argument("--no-prune", action="store_true")
    p.add_argument(
        "--solver-gamma", default="0.1",
        help="fixed solve tolerance, or 'formula' for the per-pair bound",
    )
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the oracle-backed verification suite")
    p.add_argument("--scale", choices=("tiny", "desk"), default="tiny")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="sweep algorithms/budgets over edge lists")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--algos", required=True, help="comma-separated algorithm names")
    p.add_argument("--k-values", required=True, help="comma-separated budgets")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--c-jl", type=float, default=1.0)
    p.add_argument("--no-prune", action="store_true")
    p.add_argument("--solver-gamma", default="0.1")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (GraphError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (SolverError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
