"""Batch command-line front end.

Subcommands: ``optimize`` (two-stage pulse search), ``verify`` (full-register
fidelity gap), ``gradcheck`` (analytic vs finite-difference gradients) and
``report`` (CSV tables from a record stream).  All randomness flows from
``--seed``; identical invocations produce identical artifacts byte for byte
(per-iteration wall times are logged in the record stream but never enter
the CSV/JSON reports).
"""

import argparse
import json
import os
import sys as _sys

import numpy as np

from .gates import build_targets
from .objective import ObjectiveWeights, TargetGate, evaluate, gradient, make_problem
from .optimizer import OptimizerConfig, two_stage_optimize
from .pulse import (DEFAULT_BOUND, default_channels, random_pulse, read_pulse,
                    write_pulse)
from .spins import SubsystemPartition, read_molecule
from .verification import check_gap, fd_gradient, gradient_discrepancy

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_UNMET = 2


class JobError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Job assembly
# ---------------------------------------------------------------------------

def _resolve_threads(value):
    if value is not None:
        return max(1, value)
    env = os.environ.get("SUBGRAPE_THREADS")
    return max(1, int(env)) if env else 1


def _load_partition(sys, args):
    if args.blocks:
        blocks = []
        for part in args.blocks.split(";"):
            labels = [tok for tok in part.replace(",", " ").split() if tok]
            if not labels:
                raise JobError("empty block in --blocks")
            blocks.append(tuple(sys.index(lab) for lab in labels))
        partition = SubsystemPartition(tuple(blocks))
    elif args.partition:
        if args.partition not in sys.partitions:
            known = ", ".join(sorted(sys.partitions)) or "none"
            raise JobError(
                f"molecule defines no partition {args.partition!r} (has: {known})")
        partition = sys.partitions[args.partition]
    else:
        raise JobError("need --partition NAME or --blocks")
    if args.drop:
        dropped = set()
        for tok in args.drop.split(","):
            pair = tok.split(":")
            if len(pair) != 2:
                raise JobError(f"bad --drop entry {tok!r} (use LABEL:LABEL)")
            i, j = sys.index(pair[0]), sys.index(pair[1])
            dropped.add((min(i, j), max(i, j)))
        partition = SubsystemPartition(partition.blocks, partition.names,
                                       frozenset(dropped))
    partition.validate(sys.n_spins)
    return partition


def _load_targets(sys, partition, args):
    if args.target and args.target_file:
        raise JobError("give either --target or --target-file, not both")
    if args.target:
        return build_targets(sys, partition, args.target)
    if args.target_file:
        by_name = {}
        for tok in args.target_file:
            if "=" not in tok:
                raise JobError(f"bad --target-file entry {tok!r} (use NAME=PATH)")
            name, path = tok.split("=", 1)
            if name not in partition.names:
                raise JobError(f"unknown block {name!r} "
                               f"(partition has {list(partition.names)})")
            rows = []
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        rows.append([complex(v) for v in line.split()])
            by_name[name] = np.array(rows, dtype=np.complex128)
        blocks = []
        for k, name in enumerate(partition.names):
            d = 2 ** len(partition.blocks[k])
            blocks.append(by_name.get(name, np.eye(d, dtype=np.complex128)))
        return TargetGate(tuple(blocks))
    raise JobError("need --target or --target-file")


def _load_job(args):
    try:
        sys = read_molecule(args.molecule)
    except OSError as exc:
        raise JobError(f"cannot read molecule file: {exc}") from None
    partition = _load_partition(sys, args)
    targets = _load_targets(sys, partition, args)
    return sys, partition, targets


def _load_or_make_pulse(sys, args):
    if getattr(args, "pulse_in", None):
        pulse = read_pulse(args.pulse_in)
        _check_channels(sys, pulse)
        return pulse
    channels = default_channels(sys, args.bound)
    return random_pulse(channels, args.slices, args.tau, n_modes=args.modes,
                        seed=args.seed)


def _check_channels(sys, pulse):
    have = {(c.species, c.axis) for c in pulse.channels}
    want = {(sp, ax) for sp in sys.channels for ax in ("x", "y")}
    if have != want:
        raise JobError(
            f"pulse channels {sorted(have)} do not match the molecule's "
            f"species channels {sorted(want)}")


# ---------------------------------------------------------------------------
# Record stream (JSON lines)
# ---------------------------------------------------------------------------

def _pair_key(pair):
    return f"{pair[0]}-{pair[1]}"


def _report_dict(report):
    return {
        "phi": report.phi,
        "f": report.f_product,
        "f_blocks": list(report.f_blocks),
        "f_pairs": {_pair_key(p): v for p, v in sorted(report.f_pairs.items())},
    }


def _record_lines(record):
    for it in record.iterations:
        yield {
            "type": "iteration", "stage": it.stage, "iter": it.index,
            "phi": it.phi, "f": it.f_product, "f_blocks": list(it.f_blocks),
            "f_pairs": {_pair_key(p): v for p, v in sorted(it.f_pairs.items())},
            "grad_norm": it.grad_norm, "step": it.step, "wall_s": it.wall_s,
        }
    for st in record.stages:
        yield {
            "type": "stage", "stage": st["stage"], "status": st["status"],
            "start_iter": st["start_iter"], "end_iter": st["end_iter"],
            "weights": {_pair_key(p): v for p, v in sorted(st["weights"].items())},
        }
    if record.stage1_report is not None:
        yield {"type": "summary", "phase": "before_robustness",
               **_report_dict(record.stage1_report)}
    if record.final_report is not None:
        yield {"type": "summary", "phase": "after_robustness",
               **_report_dict(record.final_report)}


def _write_records(record, path):
    with open(path, "w", encoding="utf-8") as fh:
        for line in _record_lines(record):
            fh.write(json.dumps(line, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_optimize(args):
    sys, partition, targets = _load_job(args)
    problem = make_problem(sys, partition, default_channels(sys, args.bound),
                           targets)
    pulse = _load_or_make_pulse(sys, args)
    config = OptimizerConfig(
        max_iters=args.max_iters,
        stage1_threshold=args.stage1_threshold,
        lambda0=args.lam,
        lambda_growth=args.lambda_growth,
        robustness_target=args.robustness_target,
        max_lambda_rounds=args.max_lambda_rounds,
        fidelity_slack=args.fidelity_slack,
        grad_mode="approx" if args.grad_approx else "exact",
        threads=_resolve_threads(args.threads),
        seed=args.seed,
    )
    best, record, report = two_stage_optimize(problem, pulse, config)

    write_pulse(best, f"{args.out}.pulse")
    if record.stage1_pulse is not None:
        write_pulse(record.stage1_pulse, f"{args.out}_stage1.pulse")
    _write_records(record, f"{args.out}_records.jsonl")
    payload = {
        "status": record.overall_status,
        "stages": [
            {"stage": st["stage"], "status": st["status"],
             "iterations": st["end_iter"] - st["start_iter"],
             "weights": {_pair_key(p): v
                         for p, v in sorted(st["weights"].items())}}
            for st in record.stages
        ],
        "before_robustness": (_report_dict(record.stage1_report)
                              if record.stage1_report else None),
        "after_robustness": _report_dict(report),
    }
    with open(f"{args.out}_report.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"status: {record.overall_status}")
    print(f"f = {report.f_product:.12f}  phi = {report.phi:.12f}")
    for p, v in sorted(report.f_pairs.items()):
        print(f"pair {_pair_key(p)}: {v:.6e}")
    return EXIT_OK if record.overall_status == "converged" else EXIT_UNMET


def cmd_verify(args):
    sys, partition, targets = _load_job(args)
    pulse = read_pulse(args.pulse)
    _check_channels(sys, pulse)
    result = check_gap(sys, partition, pulse, targets, cap=args.cap,
                       big=args.big)
    line = {
        "type": "verification",
        "full_fidelity": result.fidelity,
        "f": result.f_product,
        "gap": result.gap,
        "gap_bound": args.gap_bound,
        "passed": bool(result.gap < args.gap_bound),
    }
    if args.report:
        with open(args.report, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    print(f"F = {result.fidelity:.12f}")
    print(f"f = {result.f_product:.12f}")
    print(f"gap = {result.gap:.6e}  (bound {args.gap_bound:g})")
    return EXIT_OK if line["passed"] else EXIT_UNMET


def cmd_gradcheck(args):
    sys, partition, targets = _load_job(args)
    oversize = [n for n, b in zip(partition.names, partition.blocks)
                if len(b) > 3]
    if oversize:
        raise JobError(
            f"gradcheck is limited to 3 spins per block; blocks {oversize} "
            f"are larger")
    channels = default_channels(sys, args.bound)
    problem = make_problem(sys, partition, channels, targets)
    pulse = random_pulse(channels, args.slices, args.tau, n_modes=args.modes,
                         seed=args.seed)
    weights = ObjectiveWeights.uniform(partition.pairs(), args.lam)
    mode = "approx" if args.approx else "exact"
    res = evaluate(problem, pulse, weights, pairs="active")
    analytic = gradient(problem, res.trajectories, res.vl_states, weights,
                        pulse, mode=mode)
    step = args.step if args.step else 1e-6 * args.bound
    reference = fd_gradient(problem, pulse, weights, step=step)
    err, kind = gradient_discrepancy(analytic, reference)
    tol = args.tol if args.tol else (1e-2 if args.approx else 1e-5)

    print(f"{'channel':>8} {'max|analytic|':>15} {'max|fd|':>15} {'max|diff|':>15}")
    for c, chan in enumerate(pulse.channels):
        name = f"{chan.species},{chan.axis}"
        print(f"{name:>8} {np.abs(analytic[:, c]).max():15.6e} "
              f"{np.abs(reference[:, c]).max():15.6e} "
              f"{np.abs(analytic[:, c] - reference[:, c]).max():15.6e}")
    print(f"mode {mode}: max {kind} error {err:.3e} (tolerance {tol:g})")
    return EXIT_OK if err <= tol else EXIT_UNMET


def cmd_report(args):
    iterations = []
    stages = []
    summaries = []
    verifications = []
    with open(args.records, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise JobError(f"{args.records}:{lineno}: bad record ({exc})")
            kind = rec.get("type")
            if kind == "iteration":
                iterations.append(rec)
            elif kind == "stage":
                stages.append(rec)
            elif kind == "summary":
                summaries.append(rec)
            elif kind == "verification":
                verifications.append(rec)
            else:
                raise JobError(f"{args.records}:{lineno}: unknown record type "
                               f"{kind!r}")
    if not iterations and not summaries:
        raise JobError("record stream holds no iteration or summary records")

    n_blocks = len(iterations[0]["f_blocks"]) if iterations else len(
        summaries[0]["f_blocks"])
    pair_keys = sorted({k for rec in iterations + summaries
                        for k in rec.get("f_pairs", {})})
    block_cols = [f"f_block_{k}" for k in range(n_blocks)]
    pair_cols = [f"r_pair_{k}" for k in pair_keys]

    def fmt(x):
        return repr(float(x))

    iter_path = f"{args.out}_iterations.csv"
    with open(iter_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["iter", "stage", "phi", "f"] + block_cols
                          + pair_cols + ["grad_norm", "step"]) + "\n")
        for rec in iterations:
            row = [str(rec["iter"]), str(rec["stage"]), fmt(rec["phi"]),
                   fmt(rec["f"])]
            row += [fmt(v) for v in rec["f_blocks"]]
            row += [fmt(rec["f_pairs"][k]) if k in rec["f_pairs"] else ""
                    for k in pair_keys]
            row += [fmt(rec["grad_norm"]), fmt(rec["step"])]
            fh.write(",".join(row) + "\n")

    summary_path = f"{args.out}_summary.csv"
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["phase", "phi", "f"] + block_cols + pair_cols
                          + ["full_fidelity", "gap"]) + "\n")
        for rec in summaries:
            row = [rec["phase"], fmt(rec["phi"]), fmt(rec["f"])]
            row += [fmt(v) for v in rec["f_blocks"]]
            row += [fmt(rec["f_pairs"][k]) if k in rec["f_pairs"] else ""
                    for k in pair_keys]
            row += ["", ""]
            fh.write(",".join(row) + "\n")
        for rec in verifications:
            row = ["verification", "", fmt(rec["f"])]
            row += ["" for _ in block_cols]
            row += ["" for _ in pair_cols]
            row += [fmt(rec["full_fidelity"]), fmt(rec["gap"])]
            fh.write(",".join(row) + "\n")
    print(f"wrote {iter_path} and {summary_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_job_args(p):
    p.add_argument("--molecule", required=True, help="molecule file path")
    p.add_argument("--partition", help="partition name from the molecule file")
    p.add_argument("--blocks",
                   help="inline partition: blocks of labels, ';' separated")
    p.add_argument("--drop", help="inter-block couplings to ignore, "
                                  "comma-separated LABEL:LABEL pairs")
    p.add_argument("--target", help="named gate, e.g. 'Rx(pi/2) C1'")
    p.add_argument("--target-file", action="append",
                   help="NAME=PATH block target matrix (repeatable)")
    p.add_argument("--bound", type=float, default=DEFAULT_BOUND,
                   help="per-channel amplitude bound in rad/s")


def _add_pulse_args(p):
    p.add_argument("--slices", type=int, default=200,
                   help="number of pulse slices")
    p.add_argument("--tau", type=float, default=5e-6,
                   help="slice duration in seconds")
    p.add_argument("--modes", type=int, default=6,
                   help="modes in the random initial pulse")
    p.add_argument("--seed", type=int, default=0, help="random seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="subgrape",
        description="Subsystem-based robust pulse optimization for coupled "
                    "spin systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="two-stage pulse search")
    _add_job_args(p_opt)
    _add_pulse_args(p_opt)
    p_opt.add_argument("--pulse-in", help="start from this pulse file")
    p_opt.add_argument("--out", default="run", help="artifact path prefix")
    p_opt.add_argument("--lambda", dest="lam", type=float, default=1.0,
                       help="initial robustness weight (0 skips stage 2)")
    p_opt.add_argument("--lambda-growth", type=float, default=2.0)
    p_opt.add_argument("--robustness-target", type=float, default=1e-4)
    p_opt.add_argument("--stage1-threshold", type=float, default=0.999)
    p_opt.add_argument("--fidelity-slack", type=float, default=1e-3)
    p_opt.add_argument("--max-iters", type=int, default=300,
                       help="iteration cap per stage run")
    p_opt.add_argument("--max-lambda-rounds", type=int, default=5)
    p_opt.add_argument("--grad-approx", action="store_true",
                       help="first-order slice derivatives (faster)")
    p_opt.add_argument("--threads", type=int, default=None,
                       help="worker threads (default SUBGRAPE_THREADS or 1)")
    p_opt.set_defaults(func=cmd_optimize)

    p_ver = sub.add_parser("verify", help="full-register fidelity gap")
    _add_job_args(p_ver)
    p_ver.add_argument("--pulse", required=True, help="pulse file to verify")
    p_ver.add_argument("--gap-bound", type=float, default=0.01)
    p_ver.add_argument("--cap", type=int, default=12,
                       help="largest register size allowed")
    p_ver.add_argument("--big", action="store_true",
                       help="allow registers of 10+ spins (slow)")
    p_ver.add_argument("--report", help="record stream to append the result to")
    p_ver.set_defaults(func=cmd_verify)

    p_grad = sub.add_parser("gradcheck",
                            help="analytic vs finite-difference gradient")
    _add_job_args(p_grad)
    _add_pulse_args(p_grad)
    p_grad.add_argument("--lambda", dest="lam", type=float, default=0.5,
                        help="robustness weight used in the check")
    p_grad.add_argument("--approx", action="store_true",
                        help="check the first-order gradient mode")
    p_grad.add_argument("--step", type=float, default=None,
                        help="finite-difference step (rad/s)")
    p_grad.add_argument("--tol", type=float, default=None,
                        help="override the pass tolerance")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_rep = sub.add_parser("report", help="CSV tables from a record stream")
    p_rep.add_argument("--records", required=True, help="JSONL record stream")
    p_rep.add_argument("--out", default="report", help="CSV path prefix")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (JobError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
