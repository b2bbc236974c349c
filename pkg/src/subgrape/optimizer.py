"""Gradient-ascent pulse search: line-searched stages and the two-stage
fidelity-then-robustness schedule.

Stage 1 maximizes the product of block fidelities (all weights zero).
Stage 2 turns on uniform pair weights and grows them geometrically between
runs until every robustness term is below its target, while rejecting any
step that drags the fidelity product below a configured floor.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .objective import (ObjectiveWeights, evaluate, fitness_and_gradient)
from .pulse import clip


@dataclass
class OptimizerConfig:
    max_iters: int = 300           # per stage run
    stage2_max_iters: int = None   # override for stage-2 runs (default: max_iters)
    c1: float = 1e-4               # Armijo sufficient-increase fraction
    shrink: float = 0.5            # backtracking factor
    init_step: float = 0.2         # first trial moves max gradient entry this fraction of the bound
    max_backtracks: int = 40
    grad_tol: float = 1e-11        # terminate below this gradient inf-norm
    phi_tol: float = 1e-12         # terminate below this accepted gain
    stage1_threshold: float = 0.999
    lambda0: float = 1.0
    lambda_growth: float = 2.0
    robustness_target: float = 1e-4
    max_lambda_rounds: int = 5
    fidelity_slack: float = 1e-3   # stage 2 must keep f above threshold - slack
    grad_mode: str = "exact"       # "exact" or "approx"
    threads: int = 1
    seed: int = 0


@dataclass
class IterationRecord:
    stage: int
    index: int          # global iteration counter
    phi: float
    f_product: float
    f_blocks: list
    f_pairs: dict
    grad_norm: float
    step: float
    wall_s: float


@dataclass
class RunRecord:
    iterations: list = field(default_factory=list)
    stages: list = field(default_factory=list)  # per stage-run summaries
    stage1_report: object = None
    stage1_pulse: object = None
    final_report: object = None
    overall_status: str = None

    def next_index(self):
        return len(self.iterations)


def run_stage(problem, pulse, weights, config, *, stage=1, stop_when=None,
              fidelity_floor=None, record=None, max_iters=None):
    """One line-searched ascent run.

    Iterates gradient evaluation, Armijo backtracking along the gradient,
    projection onto the amplitude bounds, until ``stop_when`` holds, the
    gradient or the gain vanishes, or ``max_iters`` is reached.  A failed
    line search returns the current best with status "stalled" rather than
    raising.  Returns (pulse, record, status).
    """
    rec = record if record is not None else RunRecord()
    start_iter = rec.next_index()
    bound_max = float(pulse.bounds().max())
    status = "max_iters"
    prev = None  # (amplitudes, gradient) at the last accepted point
    if max_iters is None:
        max_iters = config.max_iters

    for _ in range(max_iters):
        t0 = time.perf_counter()
        report, grad = fitness_and_gradient(
            problem, pulse, weights, mode=config.grad_mode,
            threads=config.threads)
        grad_norm = float(np.abs(grad).max())

        if stop_when is not None and stop_when(report):
            status = "threshold"
            rec.iterations.append(IterationRecord(
                stage, rec.next_index(), report.phi, report.f_product,
                list(report.f_blocks), dict(report.f_pairs), grad_norm, 0.0,
                time.perf_counter() - t0))
            break
        if grad_norm < config.grad_tol:
            status = "stalled"
            rec.iterations.append(IterationRecord(
                stage, rec.next_index(), report.phi, report.f_product,
                list(report.f_blocks), dict(report.f_pairs), grad_norm, 0.0,
                time.perf_counter() - t0))
            break

        # Armijo backtracking on the projected update.  The first trial
        # length comes from a Barzilai-Borwein estimate once two gradients
        # are available (pure scaling heuristic; monotonicity is still
        # enforced by the Armijo test below).
        step = config.init_step * bound_max / grad_norm
        if prev is not None:
            s_vec = pulse.amplitudes - prev[0]
            y_vec = prev[1] - grad
            sy = float(np.sum(s_vec * y_vec))
            if sy > 0.0:
                bb = float(np.sum(s_vec * s_vec)) / sy
                if np.isfinite(bb) and bb > 0.0:
                    step = min(bb, step * 100.0)
        accepted = None
        for _ in range(config.max_backtracks):
            trial = clip(pulse.with_amplitudes(pulse.amplitudes + step * grad))
            moved = trial.amplitudes - pulse.amplitudes
            slope = float(np.sum(grad * moved))
            if slope <= 0.0:
                break
            tres = evaluate(problem, trial, weights, pairs="active",
                            keep_products=False, threads=config.threads)
            ok = tres.report.phi >= report.phi + config.c1 * slope
            if ok and fidelity_floor is not None:
                ok = tres.report.f_product >= fidelity_floor
            if ok:
                accepted = (trial, tres.report, step)
                break
            step *= config.shrink

        if accepted is None:
            status = "stalled"
            rec.iterations.append(IterationRecord(
                stage, rec.next_index(), report.phi, report.f_product,
                list(report.f_blocks), dict(report.f_pairs), grad_norm, 0.0,
                time.perf_counter() - t0))
            break

        gain = accepted[1].phi - report.phi
        prev = (pulse.amplitudes, grad)
        pulse, report = accepted[0], accepted[1]
        rec.iterations.append(IterationRecord(
            stage, rec.next_index(), report.phi, report.f_product,
            list(report.f_blocks), dict(report.f_pairs), grad_norm,
            accepted[2], time.perf_counter() - t0))
        if gain < config.phi_tol:
            status = "ftol"
            break
        if stop_when is not None and stop_when(report):
            status = "threshold"
            break

    rec.stages.append({
        "stage": stage,
        "status": status,
        "start_iter": start_iter,
        "end_iter": rec.next_index(),
        "weights": dict(weights.values) if weights is not None else {},
    })
    return pulse, rec, status


def two_stage_optimize(problem, pulse, config):
    """Fidelity stage (weights 0) then robustness stage with growing weights.

    Returns (pulse, RunRecord, FitnessReport).  The record keeps the
    stage-1 pulse and fitness report so before/after robustness values can
    be compared; statuses: "converged", "partial" (stage 1 missed its
    threshold), "schedule_exhausted".
    """
    rec = RunRecord()
    zero = ObjectiveWeights.zero()
    pairs = problem.pairs()

    def stage1_done(report):
        return report.f_product >= config.stage1_threshold

    pulse, rec, status1 = run_stage(
        problem, pulse, zero, config, stage=1, stop_when=stage1_done,
        record=rec)

    stage1_full = evaluate(problem, pulse, zero, pairs="all",
                           keep_products=False, threads=config.threads)
    rec.stage1_report = stage1_full.report
    rec.stage1_pulse = pulse

    if status1 != "threshold":
        rec.final_report = stage1_full.report
        rec.overall_status = "partial"
        return pulse, rec, stage1_full.report

    floor = config.stage1_threshold - config.fidelity_slack

    def robust_done(report):
        if report.f_product < floor:
            return False
        return all(report.f_pairs.get(p, 0.0) <= config.robustness_target
                   for p in pairs)

    overall = "converged"
    if config.lambda0 > 0.0 and pairs:
        lam = config.lambda0
        for _ in range(config.max_lambda_rounds):
            weights = ObjectiveWeights.uniform(pairs, lam)
            pulse, rec, status2 = run_stage(
                problem, pulse, weights, config, stage=2,
                stop_when=robust_done, fidelity_floor=floor, record=rec)
            check = evaluate(problem, pulse, weights, pairs="all",
                             keep_products=False, threads=config.threads)
            if robust_done(check.report):
                break
            if check.report.f_product < floor:
                overall = "schedule_exhausted"
                break
            lam *= config.lambda_growth
        else:
            overall = "schedule_exhausted"
    else:
        rec.stages.append({
            "stage": 2, "status": "skipped",
            "start_iter": rec.next_index(), "end_iter": rec.next_index(),
            "weights": {},
        })

    final = evaluate(problem, pulse, zero, pairs="all", keep_products=False,
                     threads=config.threads)
    rec.final_report = final.report
    rec.overall_status = overall
    return pulse, rec, final.report
