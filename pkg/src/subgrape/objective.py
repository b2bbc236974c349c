"""Fitness and analytic gradients.

The figure of merit is

    Phi = prod_k f_k  -  sum_{k<j} lambda_kj * r_kj

where f_k is the phase-invariant gate fidelity of block k against its
target and r_kj is the squared Frobenius norm (normalized by the squared
pair dimension) of the first-order response of the pair propagator to the
inter-block coupling.  Gradients are assembled per slice from cached
forward products and a running adjoint product; slice derivatives are
exact (augmented block exponential) by default, with the first-order
-i*tau*B*U[m] form available as a fast approximate mode.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .linalg import frob_norm_sq, trace_inner, unitarity_defect
from .propagation import (end_propagator, pair_end_propagator,
                          propagate_pair, propagate_subsystem,
                          propagator_frechet, van_loan_generators)
from .spins import build_hamiltonians, control_operators


@dataclass
class TargetGate:
    """Per-block target unitaries; the overall target is their tensor product."""

    blocks: tuple

    def __post_init__(self):
        self.blocks = tuple(np.asarray(b, dtype=np.complex128)
                            for b in self.blocks)
        for k, b in enumerate(self.blocks):
            if b.ndim != 2 or b.shape[0] != b.shape[1]:
                raise ValueError(f"target {k} is not square")
            if unitarity_defect(b) > 1e-10 * b.shape[0]:
                raise ValueError(f"target {k} is not unitary")


@dataclass
class ObjectiveWeights:
    """Nonnegative weight per block pair."""

    values: dict  # (k, j) with k < j  ->  lambda >= 0

    def __post_init__(self):
        for pair, lam in self.values.items():
            if lam < 0:
                raise ValueError(f"negative weight for pair {pair}")

    @classmethod
    def uniform(cls, pairs, value):
        return cls({tuple(p): float(value) for p in pairs})

    @classmethod
    def zero(cls):
        return cls({})

    def get(self, pair):
        return self.values.get(tuple(pair), 0.0)

    def active_pairs(self):
        return sorted(p for p, lam in self.values.items() if lam > 0)


@dataclass
class FitnessReport:
    f_blocks: list
    f_pairs: dict
    phi: float
    f_product: float
    full_fidelity: float = None


def subsystem_fidelity(u_end, target):
    """Phase-invariant gate fidelity |Tr(U target^dag)|^2 / d^2."""
    u_end = np.asarray(u_end)
    d = u_end.shape[0]
    return abs(trace_inner(u_end, target)) ** 2 / d**2


def robustness_term(response):
    """Normalized squared Frobenius norm of a pair's first-order response."""
    d = np.asarray(response).shape[0]
    return frob_norm_sq(response) / d**2


def fitness(f_blocks, f_pairs, weights):
    """Phi and the bare product fidelity; raises if a weighted term is absent."""
    f_product = float(np.prod(f_blocks))
    phi = f_product
    for pair in sorted(weights.values):
        lam = weights.values[pair]
        if lam == 0.0:
            continue
        if pair not in f_pairs:
            raise ValueError(f"no robustness term computed for pair {pair}")
        phi -= lam * f_pairs[pair]
    return phi, f_product


@dataclass
class ControlProblem:
    """Hamiltonians, control operators and targets for one optimization."""

    hams: "HamiltonianSet"
    control_ops: list          # per block: (C, d_k, d_k)
    targets: TargetGate
    _gens: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        dims = self.hams.block_dims
        if len(self.targets.blocks) != len(dims):
            raise ValueError("one target per block required")
        for k, (tgt, d) in enumerate(zip(self.targets.blocks, dims)):
            if tgt.shape != (d, d):
                raise ValueError(
                    f"target {k} has shape {tgt.shape}, block dim is {d}")

    @property
    def n_blocks(self):
        return len(self.hams.intra)

    @property
    def n_channels(self):
        return self.control_ops[0].shape[0]

    def pairs(self):
        return self.hams.partition.pairs()

    def pair_generators(self, pair):
        pair = tuple(pair)
        if pair not in self._gens:
            k, j = pair
            self._gens[pair] = van_loan_generators(
                self.hams.intra[k], self.hams.intra[j],
                self.hams.pair_couplings[pair],
                self.control_ops[k], self.control_ops[j], pair=pair)
        return self._gens[pair]


def make_problem(sys, partition, channels, targets):
    """Assemble a ControlProblem from a spin system and partition."""
    hams = build_hamiltonians(sys, partition)
    ops = control_operators(sys, partition, channels)
    return ControlProblem(hams, [np.asarray(o) for o in ops], targets)


@dataclass
class EvalResult:
    report: FitnessReport
    trajectories: list = None     # per block, when products were kept
    vl_states: dict = None        # pair -> VanLoanState, when kept


def _wanted_pairs(problem, weights, pairs):
    if pairs == "none":
        return []
    if pairs == "all":
        return problem.pairs()
    return weights.active_pairs() if weights is not None else []


def evaluate(problem, pulse, weights=None, pairs="active", keep_products=True,
             threads=1):
    """Evaluate the fitness; optionally cache trajectories for gradients.

    ``pairs`` selects which robustness terms to compute: "active" (those
    with positive weight), "all", or "none".
    """
    if weights is None:
        weights = ObjectiveWeights.zero()
    wanted = _wanted_pairs(problem, weights, pairs)

    def block_task(k):
        if keep_products:
            traj = propagate_subsystem(
                problem.hams.intra[k], problem.control_ops[k], pulse, block=k)
            return traj
        return end_propagator(problem.hams.intra[k], problem.control_ops[k],
                              pulse)

    def pair_task(pair):
        gens = problem.pair_generators(pair)
        if keep_products:
            return propagate_pair(gens, pulse)
        final = end_propagator(gens.lifted_static, gens.lifted_controls, pulse)
        d = gens.dim
        return final[:d, d:]

    blocks = list(range(problem.n_blocks))
    if threads > 1 and len(blocks) + len(wanted) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            block_futs = {k: pool.submit(block_task, k) for k in blocks}
            pair_futs = {p: pool.submit(pair_task, p) for p in wanted}
            block_res = {k: f.result() for k, f in block_futs.items()}
            pair_res = {p: f.result() for p, f in pair_futs.items()}
    else:
        block_res = {k: block_task(k) for k in blocks}
        pair_res = {p: pair_task(p) for p in wanted}

    trajectories = None
    vl_states = None
    if keep_products:
        trajectories = [block_res[k] for k in blocks]
        vl_states = dict(sorted(pair_res.items()))
        finals = [t.final for t in trajectories]
        responses = {p: s.response for p, s in vl_states.items()}
    else:
        finals = [block_res[k] for k in blocks]
        responses = pair_res

    f_blocks = [subsystem_fidelity(finals[k], problem.targets.blocks[k])
                for k in blocks]
    f_pairs = {p: robustness_term(r) for p, r in sorted(responses.items())}
    phi, f_product = fitness(f_blocks, f_pairs, weights)
    report = FitnessReport(f_blocks, f_pairs, phi, f_product)
    return EvalResult(report, trajectories, vl_states)


def _product_except(vals):
    """out[k] = prod of vals excluding entry k (no division)."""
    n = len(vals)
    pre = np.ones(n)
    suf = np.ones(n)
    for i in range(1, n):
        pre[i] = pre[i - 1] * vals[i - 1]
    for i in range(n - 2, -1, -1):
        suf[i] = suf[i + 1] * vals[i + 1]
    return pre * suf


def block_fidelity_gradient(problem, k, traj, pulse, mode="exact"):
    """d f_k / d u[m, c] for one block, from its cached trajectory.

    The slice derivative enters through a single directional derivative of
    the slice exponential along the adjoint weight matrix (trace cycling),
    so the cost per slice is one augmented exponential regardless of the
    channel count.
    """
    n_slices = pulse.n_slices
    tau = pulse.tau_s
    amps = pulse.amplitudes
    tgt = problem.targets.blocks[k]
    ops = problem.control_ops[k]
    h_static = problem.hams.intra[k]
    d = traj.dim
    tr_f = trace_inner(traj.final, tgt)
    grad = np.zeros((n_slices, pulse.n_channels))
    pref = 2.0 / d**2
    back = np.eye(d, dtype=np.complex128)
    for m in range(n_slices - 1, -1, -1):
        y = tgt.conj().T @ back
        if mode == "exact":
            x = traj.forward[m - 1] @ y if m > 0 else y
            h_m = h_static + np.tensordot(amps[m], ops, axes=(0, 0))
            kmat = propagator_frechet(-1j * tau * h_m, x)
        else:
            kmat = traj.forward[m] @ y
        coefs = -1j * tau * np.einsum("cij,ji->c", ops, kmat)
        grad[m] = pref * (coefs * np.conj(tr_f)).real
        back = back @ traj.slices[m]
    return grad


def pair_response_gradient(vl, pulse, mode="exact"):
    """d r_kj / d u[m, c] for one pair, from its cached lifted trajectory."""
    n_slices = pulse.n_slices
    tau = pulse.tau_s
    amps = pulse.amplitudes
    if vl.slices.shape[0] != n_slices:
        raise ValueError("cached pair trajectory does not match the pulse")
    gens = vl.generators
    d = vl.dim
    grad = np.zeros((n_slices, pulse.n_channels))
    pref = 2.0 / d**2
    extract = np.zeros((2 * d, 2 * d), dtype=np.complex128)
    extract[d:, :d] = vl.response.conj().T
    back = np.eye(2 * d, dtype=np.complex128)
    for m in range(n_slices - 1, -1, -1):
        y = extract @ back
        if mode == "exact":
            w = vl.forward[m - 1] @ y if m > 0 else y
            l_m = gens.lifted_static + np.tensordot(
                amps[m], gens.lifted_controls, axes=(0, 0))
            kmat = propagator_frechet(-1j * tau * l_m, w)
        else:
            kmat = vl.forward[m] @ y
        ksum = kmat[:d, :d] + kmat[d:, d:]
        coefs = -1j * tau * np.einsum("cij,ji->c", gens.a_controls, ksum)
        grad[m] = pref * coefs.real
        back = back @ vl.slices[m]
    return grad


def gradient(problem, trajectories, vl_states, weights, pulse, mode="exact"):
    """d Phi / d u[m, c] from cached trajectories.

    mode "exact": slice derivatives via the augmented block exponential.
    mode "approx": first-order -i*tau*B*U[m] slice derivatives (faster,
    error O(tau*||H||) relative).
    """
    if mode not in ("exact", "approx"):
        raise ValueError(f"unknown gradient mode {mode!r}")
    if weights is None:
        weights = ObjectiveWeights.zero()
    if trajectories[0].slices.shape[0] != pulse.n_slices:
        raise ValueError("cached trajectories do not match the pulse")
    f_blocks = [subsystem_fidelity(t.final, problem.targets.blocks[k])
                for k, t in enumerate(trajectories)]
    prods = _product_except(f_blocks)
    grad = np.zeros((pulse.n_slices, pulse.n_channels))
    for k, traj in enumerate(trajectories):
        grad += prods[k] * block_fidelity_gradient(problem, k, traj, pulse, mode)
    for pair in sorted(vl_states or {}):
        lam = weights.get(pair)
        if lam == 0.0:
            continue
        grad -= lam * pair_response_gradient(vl_states[pair], pulse, mode)
    return grad


def fitness_and_gradient(problem, pulse, weights, mode="exact", threads=1):
    """One forward+backward pass; pair trajectories are streamed one at a
    time (or concurrently with threads > 1, trading memory for speed)."""
    if weights is None:
        weights = ObjectiveWeights.zero()

    def block_task(k):
        traj = propagate_subsystem(
            problem.hams.intra[k], problem.control_ops[k], pulse, block=k)
        return traj, block_fidelity_gradient(problem, k, traj, pulse, mode)

    def pair_task(pair):
        vl = propagate_pair(problem.pair_generators(pair), pulse)
        return (robustness_term(vl.response),
                pair_response_gradient(vl, pulse, mode))

    blocks = list(range(problem.n_blocks))
    active = weights.active_pairs()
    grad = np.zeros((pulse.n_slices, pulse.n_channels))
    if threads > 1 and len(blocks) + len(active) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            bfuts = {k: pool.submit(block_task, k) for k in blocks}
            pfuts = {p: pool.submit(pair_task, p) for p in active}
            bres = {k: f.result() for k, f in bfuts.items()}
            pres = {p: f.result() for p, f in pfuts.items()}
    else:
        bres = {k: block_task(k) for k in blocks}
        pres = {p: pair_task(p) for p in active}

    f_blocks = [subsystem_fidelity(bres[k][0].final, problem.targets.blocks[k])
                for k in blocks]
    prods = _product_except(f_blocks)
    for k in blocks:
        grad += prods[k] * bres[k][1]
    f_pairs = {}
    for pair in active:
        f_pairs[pair] = pres[pair][0]
        grad -= weights.get(pair) * pres[pair][1]
    phi, f_product = fitness(f_blocks, f_pairs, weights)
    return FitnessReport(f_blocks, f_pairs, phi, f_product), grad
