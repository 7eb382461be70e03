"""Command-line front end.

Exit status: 0 when every check passes, 1 when a bound or certificate is
violated, 2 for usage, parse or size errors.  ``RESCHED_TOL`` overrides the
default numeric tolerance.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import TOL, ReschedError
from .mimic import TraceError
from .problems import OracleTooLarge, load_instance

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


def _print_json(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True, default=float))


def _ratio_line(label, cost, opt, bound) -> str:
    ratio = cost / opt
    return f"{label}: cost={cost:.10g} opt={opt:.10g} ratio={ratio:.10g} bound={bound:.10g} margin={bound - ratio:.3g}"


def cmd_run(args) -> int:
    from .mimic import disc_bound, randomized_bound, randomized_expected_cost, run_disc, run_mimic
    from .oracle import get_oracle

    inst = load_instance(args.instance)
    opt = get_oracle(inst).opt_cost()
    g = inst.gamma
    if args.algorithm == "mimic":
        cost, bound = run_mimic(inst, args.omega).cost.total, 3 + g
    elif args.algorithm == "disc":
        beta = args.beta if args.beta is not None else 1 / args.M
        cost, bound = run_disc(inst, args.M, beta).expected_cost, disc_bound(g, args.M)
    else:
        cost, bound = randomized_expected_cost(inst, args.quadrature), randomized_bound(g)
    row = {"problem": inst.problem, "gamma": g, "algorithm": args.algorithm, "cost": cost, "opt": opt,
           "ratio": cost / opt, "bound": bound, "margin": bound - cost / opt}
    if args.json:
        _print_json(row)
    else:
        print(_ratio_line(args.algorithm, cost, opt, bound))
    # quadrature error is ~1e-9 relative, so the randomized bound gets a looser check
    slack = 1e-7 if args.algorithm == "randomized" else 1e-9
    return EXIT_VIOLATION if cost / opt > bound + slack else EXIT_OK


def cmd_disc(args) -> int:
    from .mimic import disc_bound, dump_trace, extract_partition, run_disc
    from .oracle import get_oracle

    inst = load_instance(args.instance)
    beta = args.beta if args.beta is not None else 1 / args.M
    res = run_disc(inst, args.M, beta)
    opt = get_oracle(inst).opt_cost()
    for m, tr in enumerate(res.traces):
        print(f"m={m} omega={tr.omega:.6g} phases={len(tr.phases) - 1} cost={tr.cost.total:.10g}")
    bound = disc_bound(inst.gamma, args.M)
    print(_ratio_line(f"DISC(M={args.M}, beta={beta:.6g})", res.expected_cost, opt, bound))
    if args.trace:
        dump_trace(args.trace, res, extract_partition(inst, res.grid, traces=res.traces))
    return EXIT_VIOLATION if res.expected_cost / opt > bound + 1e-9 else EXIT_OK


def cmd_tightness(args) -> int:
    from .experiments import tightness

    if args.epsilon <= 0:
        raise ValueError("--epsilon must be positive")
    rep = tightness(args.gamma, args.epsilon, args.omega, args.problem)
    if args.json:
        _print_json(rep)
    else:
        print(f"two-job ({rep['problem']}, gamma={args.gamma}, omega={args.omega}, eps={args.epsilon:g}): "
              f"ratio={rep['deterministic_ratio']:.10g} bound={rep['deterministic_bound']:.10g} "
              f"gap={rep['deterministic_gap']:.3g}")
        print("  epsilon      ratio          gap")
        for r in rep["sweep"]:
            print(f"  {r['epsilon']:<10.0e} {r['ratio']:<14.10g} {r['gap']:.3g}")
        print(f"  gap shrinks as epsilon decreases: {rep['gap_shrinks']}")
        print(f"one-job randomized: E-ratio={rep['randomized_ratio']:.10g} "
              f"bound={rep['randomized_bound']:.10g} gap={rep['randomized_gap']:.3g}")
    over = rep["deterministic_ratio"] > rep["deterministic_bound"] + 1e-9
    return EXIT_VIOLATION if over else EXIT_OK


def cmd_flaw(args) -> int:
    from .experiments import flaw_table

    m_list = [int(float(x)) for x in args.m_list.split(",")]
    rows = flaw_table(args.k, m_list, args.v)
    if args.json:
        _print_json(rows)
        return EXIT_OK
    print(f"k={args.k} v={args.v}  limit as m grows: {rows[0]['limit']:.10g}")
    print("  m            L_{m,v}        |L - 2|")
    for r in rows:
        print(f"  {r['m']:<12d} {r['L']:<14.10g} {r['distance_to_2']:.3g}")
    return EXIT_OK


def cmd_audit(args) -> int:
    from .audit import audit_instance
    from .lp import read_lp

    inst = load_instance(args.instance)
    rep = audit_instance(inst, args.M, args.beta, args.export_lp, solve=not args.no_solve)
    if args.export_lp:
        read_lp(args.export_lp)
    if args.json:
        _print_json(rep.summary())
    else:
        lhs, p_star, dual = rep.chain
        print(f"{rep.problem} gamma={rep.gamma} M={rep.M} beta={rep.beta:.6g} K={rep.K} Q={rep.Q}")
        print(f"  MIMIC(gamma, 0) ratio {rep.mimic_ratio:.10g} (bound {3 + rep.gamma:.10g})")
        print(f"  DISC ratio {rep.ratio:.10g} (bound {rep.bound:.10g})")
        print(f"  cost identity gap {rep.identity_gap:.3g}, last-block OPT gap {rep.primal.opt_identity_error:.3g}")
        worst = max(rep.primal.max_violation.values())
        print(f"  primal point: worst row excess {worst:.3g} ({'ok' if rep.primal.ok else 'VIOLATED'})")
        print(f"  dual: {'feasible' if rep.cert.dual_ok else 'INFEASIBLE'}, tight: {', '.join(rep.cert.tight)}")
        p = "n/a (Q > 6)" if p_star is None else f"{p_star:.10g}"
        print(f"  chain: M*ratio={lhs:.10g} <= P*={p} <= dual={dual:.10g}")
        for v in rep.violations:
            print(f"  VIOLATION: {v}")
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def _write_repro(violations, directory) -> list[Path]:
    out = []
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for v in violations:
        path = d / f"repro_{v['instance']['problem']}_{v['seed']}_{v['id']}_M{v['M']}.json"
        path.write_text(json.dumps(v, indent=2, sort_keys=True) + "\n")
        out.append(path)
    return out


def cmd_fuzz(args) -> int:
    from .experiments import fuzz

    if args.count < 0:
        raise ValueError("--count must be non-negative")
    rep = fuzz(args.problem, args.count, args.seed, args.max_jobs, workers=args.workers)
    agg = rep.aggregate()
    if args.out:
        for p in rep.write(args.out):
            print(f"wrote {p}")
    print(f"{args.problem}: {agg['instances']} instances, {agg['count']} rows, "
          f"max ratio {agg['max_ratio']:.10g}, min margin {agg['min_margin']:.3g}, "
          f"violations {agg['violations']}")
    for alg, r in agg["max_ratio_by_algorithm"].items():
        print(f"  {alg:<24} max ratio {r:.10g}")
    if rep.violations:
        for p in _write_repro(rep.violations, args.repro_dir):
            print(f"repro bundle: {p}")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_export_lp(args) -> int:
    from .lp import build_primal, build_primal_lp, export_lp
    from .mimic import PhaseGrid, extract_partition

    if args.instance:
        inst = load_instance(args.instance)
        beta = args.beta if args.beta is not None else 1 / args.M
        grid = PhaseGrid(inst.gamma, args.M, beta, inst.min_completion())
        lp = build_primal(extract_partition(inst, grid, args.K), grid)
    else:
        if args.K is None:
            raise ValueError("--K is required without an instance")
        Q = args.K * args.M + args.M - 1
        delta = (2 + args.gamma) ** (1 / args.M)
        lp = build_primal_lp(Q, args.M, np.array([delta ** q for q in range(-1, Q + 1)]))
    export_lp(lp, args.output)
    rows, cols = lp.shape
    print(f"wrote {args.output}: {rows} rows, {cols} variables (Q={lp.Q}, M={lp.M})")
    return EXIT_OK


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="resched", description=__doc__.splitlines()[0] + f" (tolerance {TOL:g})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one algorithm on an instance file")
    p.add_argument("instance")
    p.add_argument("--algorithm", choices=("mimic", "disc", "randomized"), default="mimic")
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--M", type=_positive_int, default=1)
    p.add_argument("--beta", type=float)
    p.add_argument("--quadrature", type=int, default=32)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("disc", help="run DISC and show every offset")
    p.add_argument("instance")
    p.add_argument("--M", type=_positive_int, default=1)
    p.add_argument("--beta", type=float)
    p.add_argument("--trace", help="write the run trace and partition as JSON")
    p.set_defaults(func=cmd_disc)

    p = sub.add_parser("tightness", help="lower-bound instances for MIMIC and its randomized version")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--problem", choices=("trp", "machines"))
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_tightness)

    p = sub.add_parser("flaw", help="tabulate the randomized dial-a-ride lower-bound expression")
    p.add_argument("--k", type=_positive_int, default=1)
    p.add_argument("--m-list", default="3,10,100,1000,10000,100000,1000000")
    p.add_argument("--v", type=float, default=0.5)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_flaw)

    p = sub.add_parser("audit", help="full certificate chain for one instance")
    p.add_argument("instance")
    p.add_argument("--M", type=_positive_int, default=1)
    p.add_argument("--beta", type=float)
    p.add_argument("--export-lp", dest="export_lp")
    p.add_argument("--no-solve", action="store_true", help="skip the simplex solve of the primal")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("fuzz", help="audit random instances")
    p.add_argument("--problem", choices=("trp", "darp", "machines"), default="trp")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-jobs", type=_positive_int, default=6)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out", help="report prefix (writes .csv, .json and .gp)")
    p.add_argument("--repro-dir", default="repro")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("export-lp", help="write the primal LP in LP text format")
    p.add_argument("instance", nargs="?")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--M", type=_positive_int, default=1)
    p.add_argument("--K", type=_positive_int)
    p.add_argument("--beta", type=float)
    p.set_defaults(func=cmd_export_lp)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OracleTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TraceError as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (ReschedError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
