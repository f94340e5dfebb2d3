"""``mslr`` command-line interface.

Subcommands: ``synth``, ``decompose``, ``complete``, ``lambda``, ``analyze``
and ``eval``. Every run that writes an output directory also writes a
``report.json`` echoing the configuration and seeds.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import analysis
from .matrix import load_matrix, save_matrix
from .partition import PartitionSpec, load_partition_spec, partition_from_sizes
from .ratings import (RATING_RANGE, build_rating_matrix, ingest_rating_triples,
                      ingest_user_ages, split_holdout)
from .regularization import lambda_table
from .render import render_pgm
from .solver import SolverConfig, complete, decompose
from .synth import BlobSpec, add_gaussian_noise, blob_matrix, random_block_low_rank

log = logging.getLogger("mslr")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, default=_json_default)
        f.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _scales_info(partition):
    return [{"index": s.index, "block": s.label(), "kind": s.kind,
             "blocks": partition.num_blocks(s)} for s in partition]


def _solver_config(args, cycle_default):
    cycle = cycle_default if args.cycle_spin is None else args.cycle_spin
    return SolverConfig(
        lambdas=_floats(args.lambdas) if args.lambdas else None,
        rho=args.rho, max_iters=args.max_iters, feas_tol=args.feas_tol,
        rel_change_tol=args.rel_tol, cycle_spin=cycle, seed=args.seed,
        log_every=args.log_every)


def _result_report(result, partition):
    return {
        "lambdas": result.lambdas,
        "iterations": result.iterations,
        "converged": result.converged,
        "elapsed_seconds": result.elapsed,
        "final_objective": result.objective[-1],
        "final_feasibility": result.feasibility[-1],
        "objective_trace": result.objective,
        "feasibility_trace": result.feasibility,
        "rank_histograms": [{str(k): v for k, v in h.items()} for h in result.ranks(partition)],
        "component_norms": [float(np.linalg.norm(z)) for z in result.components],
        "svd_blocks_trace": result.svd_blocks,
        "svd_skipped_trace": result.svd_skipped,
    }


def cmd_synth(args):
    os.makedirs(args.out, exist_ok=True)
    if args.kind == "blobs":
        sizes = [(1, 1)] + [(min(b, args.rows), min(b, args.cols)) for b in _ints(args.block_sizes)]
        spec = PartitionSpec(mode="explicit", sizes=sizes)
        partition = spec.build(args.rows, args.cols)
        specs = []
        for k, s in enumerate(partition.scales[1:], start=2):
            full = s.block_rows == args.rows and s.block_cols == args.cols
            specs.append(BlobSpec(k, 1 if full else args.count,
                                  (args.amplitude, args.amplitude), not args.off_grid))
        Y, truth = blob_matrix(partition, specs, args.seed)
    else:
        spec = load_partition_spec(args.partition)
        partition = spec.build(args.rows, args.cols)
        L = len(partition)
        ranks = _ints(args.ranks) if args.ranks else [1] * L
        energies = _floats(args.energies) if args.energies else [10.0] * L
        Y, truth = random_block_low_rank(partition, ranks, energies, args.seed)
    if args.noise > 0:
        Y = add_gaussian_noise(Y, args.noise, args.seed + 1)
    save_matrix(Y, os.path.join(args.out, "Y.bin"))
    render_pgm(Y, os.path.join(args.out, "Y.pgm"))
    for s, X in zip(partition, truth):
        save_matrix(X, os.path.join(args.out, f"truth_{s.index}.bin"))
        render_pgm(X, os.path.join(args.out, f"truth_{s.index}.pgm"))
    _write_json(os.path.join(args.out, "partition.json"), spec.to_dict())
    _write_json(os.path.join(args.out, "report.json"), {
        "command": "synth", "argv": args.argv, "kind": args.kind, "seed": args.seed,
        "shape": [args.rows, args.cols], "partition": spec.to_dict(),
        "scales": _scales_info(partition),
        "truth_norms": [float(np.linalg.norm(t)) for t in truth],
    })
    print(f"wrote {args.kind} phantom ({args.rows}x{args.cols}, {len(partition)} scales) to {args.out}")
    return 0


def cmd_decompose(args):
    Y = load_matrix(args.input)
    spec = load_partition_spec(args.partition)
    partition = spec.build(*Y.shape)
    config = _solver_config(args, cycle_default=True)
    result = decompose(Y, partition, config)
    os.makedirs(args.out, exist_ok=True)
    for s, Z in zip(partition, result.components):
        save_matrix(Z, os.path.join(args.out, f"component_{s.index}.bin"))
        render_pgm(Z, os.path.join(args.out, f"component_{s.index}.pgm"))
    save_matrix(result.dual, os.path.join(args.out, "dual.bin"))
    report = {"command": "decompose", "argv": args.argv, "input": os.path.abspath(args.input),
              "shape": list(Y.shape), "partition": spec.to_dict(),
              "scales": _scales_info(partition), "config": config.to_dict()}
    report.update(_result_report(result, partition))
    _write_json(os.path.join(args.out, "report.json"), report)
    print(f"{result.iterations} iterations, converged={result.converged}, "
          f"objective={result.objective[-1]:.6g}, feasibility={result.feasibility[-1]:.3e}")
    for s, h in zip(partition, result.ranks(partition)):
        print(f"  scale {s.index} {s.label():>14}: rank histogram {h}")
    return 0


def _rating_problem(args):
    triples = ingest_rating_triples(args.ratings)
    ages = ingest_user_ages(args.users) if args.users else None
    return build_rating_matrix(triples, ages, args.groups)


def cmd_complete(args):
    config = _solver_config(args, cycle_default=False)
    if args.ratings:
        rm = _rating_problem(args)
        Y, mask, partition, spec_dict = rm.Y, rm.mask, rm.partition, {
            "mode": "one-sided", "axis": "cols", "groups": args.groups}
    else:
        if not (args.input and args.mask and args.partition):
            raise SystemExit("complete needs --ratings, or --input with --mask and --partition")
        Y = load_matrix(args.input)
        mask = load_matrix(args.mask) != 0
        spec = load_partition_spec(args.partition)
        partition = spec.build(*Y.shape)
        spec_dict = spec.to_dict()
    result = complete(Y, mask, partition, config)
    os.makedirs(args.out, exist_ok=True)
    save_matrix(result.completed, os.path.join(args.out, "completed.bin"))
    render_pgm(result.completed, os.path.join(args.out, "completed.pgm"))
    for s, Z in zip(partition, result.components):
        save_matrix(Z, os.path.join(args.out, f"component_{s.index}.bin"))
    report = {"command": "complete", "argv": args.argv, "shape": list(Y.shape),
              "observed_fraction": float(mask.mean()), "partition": spec_dict,
              "scales": _scales_info(partition), "config": config.to_dict()}
    report.update(_result_report(result, partition))
    _write_json(os.path.join(args.out, "report.json"), report)
    print(f"{result.iterations} iterations, converged={result.converged}, "
          f"observed {mask.mean():.1%} of {Y.shape[0]}x{Y.shape[1]}")
    return 0


def cmd_lambda(args):
    spec = load_partition_spec(args.partition)
    partition = spec.build(args.rows, args.cols)
    table = lambda_table(partition)
    if args.json:
        print(json.dumps(table, indent=2))
    else:
        print(f"{'scale':>5} {'block':>14} {'blocks':>8} {'lambda':>12}")
        for row in table:
            print(f"{row['scale']:>5} {row['block']:>14} {row['blocks']:>8} {row['lambda']:>12.6f}")
    return 0


def cmd_analyze(args):
    with open(os.path.join(args.run, "report.json")) as f:
        run = json.load(f)
    shape = tuple(run["shape"])
    spec = PartitionSpec.from_dict(run["partition"])
    partition = spec.build(*shape)
    comps = [load_matrix(os.path.join(args.run, f"component_{s.index}.bin")) for s in partition]
    Q = load_matrix(os.path.join(args.run, "dual.bin"))
    lambdas = run["lambdas"]
    subs = analysis.subspaces_from_components(comps, partition)
    t0 = time.perf_counter()
    mu = analysis.coherence_table(subs, partition, args.restarts, args.iters, args.seed)
    balance = analysis.check_balance(mu, lambdas)
    cert = analysis.certificate_check(Q, subs, lambdas, args.tol)
    report = {
        "command": "analyze", "argv": args.argv, "run": os.path.abspath(args.run),
        "seed": args.seed, "restarts": args.restarts, "iters": args.iters,
        "coherence_lower_bounds": mu.tolist(),
        "balancing_lambdas": {"bound_1": analysis.balancing_lambdas(mu, 1.0),
                              "bound_half": analysis.balancing_lambdas(mu, 0.5)},
        "balance": {"sums": balance.sums, "margins": balance.margins,
                    "pass_independence": balance.pass_independence, "pass_recovery": balance.pass_recovery},
        "certificate": {"tol": cert.tol, "tangent_residual": cert.tangent_residual,
                        "complement_ratio": cert.complement_ratio,
                        "pass_tangent": cert.pass_tangent,
                        "pass_complement": cert.pass_complement, "passed": cert.passed},
        "tangent_dimensions": [s.dimension for s in subs],
        "elapsed_seconds": time.perf_counter() - t0,
    }
    out = args.out or os.path.join(args.run, "analysis.json")
    _write_json(out, report)
    print(json.dumps({k: report[k] for k in ("balance", "certificate")}, indent=2))
    return 0


def cmd_eval(args):
    rm = _rating_problem(args)
    train, test = split_holdout(rm.mask, args.holdout, args.split_seed)
    truth = rm.entries(test)
    config = _solver_config(args, cycle_default=False)
    report = {"command": "eval", "argv": args.argv, "split_seed": args.split_seed,
              "holdout": args.holdout, "groups": args.groups, "shape": list(rm.Y.shape),
              "observed_fraction": float(rm.mask.mean()), "config": config.to_dict(),
              "clip": list(RATING_RANGE), "results": {}}
    runs = [("multiscale", rm.partition)]
    if args.baseline and args.groups > 1:
        runs.append(("lowrank", partition_from_sizes(*rm.Y.shape, [rm.Y.shape])))
    for name, partition in runs:
        cfg = SolverConfig(**{**config.to_dict(), "lambdas": None})
        result = complete(rm.Y, train, partition, cfg)
        pred = np.clip(result.completed, *RATING_RANGE)
        err = analysis.rmse(pred, truth)
        report["results"][name] = {"rmse": err, "iterations": result.iterations,
                                   "converged": result.converged, "scales": _scales_info(partition),
                                   "elapsed_seconds": result.elapsed}
        print(f"{name:>10}: RMSE {err:.4f} ({result.iterations} iterations)")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "report.json"), report)
    return 0


def _add_solver_args(p):
    p.add_argument("--lambdas", help="comma-separated per-scale weights (default: recommended)")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--feas-tol", type=float, default=1e-6)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-every", type=int, default=0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--cycle-spin", dest="cycle_spin", action="store_true", default=None)
    g.add_argument("--no-cycle-spin", dest="cycle_spin", action="store_false")


def _add_rating_args(p, required):
    p.add_argument("--ratings", required=required, help="tab-separated user/item/rating/timestamp file")
    p.add_argument("--users", help="user|age|... file for age ordering")
    p.add_argument("--groups", type=int, default=8, help="number of age groups at the finest scale")


def make_parser():
    parser = argparse.ArgumentParser(prog="mslr", description="Multi-scale low rank decomposition")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic phantom")
    p.add_argument("kind", choices=["blobs", "blocks"])
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sigma")
    p.add_argument("--block-sizes", default="4,16,64", help="blob scales (square block sides)")
    p.add_argument("--count", type=int, default=1, help="blobs per scale")
    p.add_argument("--amplitude", type=float, default=10.0)
    p.add_argument("--off-grid", action="store_true")
    p.add_argument("--partition", default="two-sided:1x1:2", help="partition for 'blocks'")
    p.add_argument("--ranks", help="per-scale block rank for 'blocks'")
    p.add_argument("--energies", help="per-scale Frobenius energy for 'blocks'")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("decompose", help="multi-scale low rank decomposition of a matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--partition", required=True, help="JSON file or inline spec like two-sided:1x1:2")
    p.add_argument("--out", required=True)
    _add_solver_args(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("complete", help="multi-scale low rank matrix completion")
    p.add_argument("--input")
    p.add_argument("--mask", help="matrix file, nonzero entries are observed")
    p.add_argument("--partition")
    p.add_argument("--out", required=True)
    _add_rating_args(p, required=False)
    _add_solver_args(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("lambda", help="print recommended per-scale weights")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("analyze", help="coherence, balance and certificate report for a run")
    p.add_argument("--run", required=True, help="output directory of 'mslr decompose'")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("eval", help="held-out RMSE of rating completion")
    _add_rating_args(p, required=True)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--no-baseline", dest="baseline", action="store_false")
    p.add_argument("--out")
    _add_solver_args(p)
    p.set_defaults(func=cmd_eval)
    return parser


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if getattr(args, "log_every", 0) and not args.verbose:
        logging.getLogger("mslr").setLevel(logging.INFO)
    try:
        return args.func(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(f"mslr: error: {exc.code}", file=sys.stderr)
            return 2
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"mslr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())
