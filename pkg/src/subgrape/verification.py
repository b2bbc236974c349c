"""Independent full-register oracles.

Everything here deliberately avoids the subsystem decomposition it is used
to check: full-register propagation, full-gate fidelity against the tensor
product of the block targets, finite-difference gradients, and the
second-order remainder check for the pairwise response blocks.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .linalg import PAULI, embed_local, trace_inner
from .objective import evaluate, make_problem
from .propagation import pair_end_propagator, propagate_pair
from .spins import full_drift_diagonal

DENSE_MAX_SPINS = 9   # dense slice exponentials up to 512 dimensions
BIG_GATE_SPINS = 10   # beyond this an explicit big=True is required


@dataclass
class FullSystemResult:
    fidelity: float        # F on the full register
    f_product: float       # product of block fidelities
    gap: float             # f_product - fidelity
    u_full: np.ndarray = None


def full_control_operators(sys, channels):
    """Dense per-channel control operators on the full register."""
    n = sys.n_spins
    d = 2**n
    chans = [(c.species, c.axis) if hasattr(c, "species") else tuple(c[:2])
             for c in channels]
    ops = np.zeros((len(chans), d, d), dtype=np.complex128)
    for ci, (species, axis) in enumerate(chans):
        for i, s in enumerate(sys.spins):
            if s.species == species:
                ops[ci] += embed_local(PAULI[axis], [i], n)
    return ops


def _sparse_control_operators(sys, channels):
    from scipy import sparse
    n = sys.n_spins
    chans = [(c.species, c.axis) if hasattr(c, "species") else tuple(c[:2])
             for c in channels]
    ops = []
    for species, axis in chans:
        op = sparse.csr_matrix((2**n, 2**n), dtype=np.complex128)
        for i, s in enumerate(sys.spins):
            if s.species == species:
                op = op + sparse.kron(
                    sparse.kron(sparse.identity(2**i, format="csr"),
                                sparse.csr_matrix(PAULI[axis])),
                    sparse.identity(2 ** (n - 1 - i), format="csr"),
                    format="csr")
        ops.append(op.tocsr())
    return ops


def full_propagate(sys, pulse, cap=12, big=False):
    """Exact piecewise-constant propagation of the full register.

    Dense slice exponentials up to 2^9; larger registers use sparse
    exponential-action per slice and must be enabled with ``big=True``.
    """
    n = sys.n_spins
    if n > cap:
        raise ValueError(f"{n} spins exceeds the configured cap of {cap}")
    if n >= BIG_GATE_SPINS and not big:
        raise ValueError(
            f"{n} spins needs big=True (expect minutes of runtime)")
    if n <= DENSE_MAX_SPINS:
        h = np.diag(full_drift_diagonal(sys)).astype(np.complex128)
        ops = full_control_operators(sys, pulse.channels)
        slices = _kernels.propagate_slices(h, ops, pulse.amplitudes,
                                           pulse.tau_s)
        u = slices[0]
        for m in range(1, slices.shape[0]):
            u = slices[m] @ u
        return u

    from scipy import sparse
    from scipy.sparse.linalg import expm_multiply
    d = 2**n
    diag = sparse.diags(full_drift_diagonal(sys).astype(np.complex128))
    ops = _sparse_control_operators(sys, pulse.channels)
    u = np.eye(d, dtype=np.complex128)
    chunk = 1024
    for m in range(pulse.n_slices):
        h_m = diag.tocsr(copy=True)
        for c, op in enumerate(ops):
            amp = pulse.amplitudes[m, c]
            if amp != 0.0:
                h_m = h_m + amp * op
        a = (-1j * pulse.tau_s) * h_m.tocsc()
        for lo in range(0, d, chunk):
            u[:, lo:lo + chunk] = expm_multiply(a, u[:, lo:lo + chunk])
    return u


def block_basis_permutation(partition, n):
    """Index map from the global basis to the block-concatenated basis."""
    order = [q for block in partition.blocks for q in block]
    x = np.arange(2**n)
    p = np.zeros(2**n, dtype=np.int64)
    for t, q in enumerate(order):
        p |= ((x >> (n - 1 - q)) & 1) << (n - 1 - t)
    return p


def embed_block_targets(targets, partition, n):
    """Tensor product of the block targets arranged on the global register.

    Blocks need not be contiguous; the operator is built in block order and
    permuted onto the global qubit ordering.
    """
    t = np.array([[1.0]], dtype=np.complex128)
    for b in targets.blocks:
        t = np.kron(t, b)
    p = block_basis_permutation(partition, n)
    return np.ascontiguousarray(t[np.ix_(p, p)])


def full_fidelity(u_full, targets, partition):
    """F = |Tr(U target^dag)|^2 / d^2 with the target assembled from blocks."""
    d = u_full.shape[0]
    n = d.bit_length() - 1
    target = embed_block_targets(targets, partition, n)
    if target.shape != u_full.shape:
        raise ValueError(
            f"target dimension {target.shape[0]} does not match {d}")
    return abs(trace_inner(u_full, target)) ** 2 / d**2


def check_gap(sys, partition, pulse, targets, cap=12, big=False,
              keep_full=False):
    """Product-of-blocks fidelity vs the brute-force full-register fidelity."""
    problem = make_problem(sys, partition, pulse.channels, targets)
    res = evaluate(problem, pulse, weights=None, pairs="none",
                   keep_products=False)
    f_product = res.report.f_product
    u_full = full_propagate(sys, pulse, cap=cap, big=big)
    fid = full_fidelity(u_full, targets, partition)
    return FullSystemResult(fid, f_product, f_product - fid,
                            u_full if keep_full else None)


def fd_gradient(problem, pulse, weights=None, step=None, threads=1):
    """Central finite differences of Phi, entry by entry (2*M*C evaluations)."""
    if step is None:
        step = 1e-6 * float(pulse.bounds().max())
    grad = np.zeros_like(pulse.amplitudes)
    for m in range(pulse.n_slices):
        for c in range(pulse.n_channels):
            vals = []
            for sgn in (+1.0, -1.0):
                amps = pulse.amplitudes.copy()
                amps[m, c] += sgn * step
                res = evaluate(problem, pulse.with_amplitudes(amps), weights,
                               pairs="active", keep_products=False,
                               threads=threads)
                vals.append(res.report.phi)
            grad[m, c] = (vals[0] - vals[1]) / (2.0 * step)
    return grad


def gradient_discrepancy(analytic, reference):
    """Max entry difference over the reference's largest entry magnitude.

    Falls back to the absolute difference when the reference gradient is
    identically zero (relative error undefined at a stationary point).
    """
    diff = float(np.abs(analytic - reference).max())
    scale = float(np.abs(reference).max())
    if scale == 0.0:
        return diff, "absolute"
    return diff / scale, "relative"


def dyson_remainder_check(generators, pulse, epsilons):
    """r(eps) = ||U(T, eps) - U(T) - eps*D||_F and r/eps^2 per epsilon.

    D is the (1,2) response block; U(T, eps) propagates with the pair
    coupling scaled by eps.  A second-order remainder gives r/eps^2
    roughly constant across decades of eps.
    """
    state = propagate_pair(generators, pulse)
    response = state.response
    u0 = state.pair_propagator
    rows = []
    for eps in epsilons:
        if eps <= 0:
            raise ValueError("epsilons must be positive")
        u_eps = pair_end_propagator(generators, pulse, eps)
        r = float(np.linalg.norm(u_eps - u0 - eps * response))
        rows.append({"epsilon": eps, "remainder": r, "ratio": r / eps**2})
    return rows
