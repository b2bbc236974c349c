"""Time evolution of subsystem blocks and block pairs.

A block evolves under its local drift plus controls.  For every block pair
the evolution is lifted to a block upper-triangular generator whose
propagator carries, in the (1,2) block, the first-order response of the
end-time propagator to the inter-block coupling (Van Loan's identity for
integrals of time-ordered exponentials).  A midpoint quadrature of the
equivalent Dyson integral serves as an independent cross-check.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .linalg import kron


@dataclass
class SubsystemTrajectory:
    """Slice propagators and forward cumulative products for one block."""

    block: int
    slices: np.ndarray     # (M, d, d) per-slice propagators
    forward: np.ndarray    # (M, d, d), forward[m] = slices[m] @ ... @ slices[0]

    @property
    def final(self):
        return self.forward[-1]

    @property
    def dim(self):
        return self.slices.shape[1]


def propagate_subsystem(h_static, control_ops, pulse, block=0):
    """Evolve one block under drift + controls, caching all products."""
    h_static = np.asarray(h_static, dtype=np.complex128)
    control_ops = np.asarray(control_ops, dtype=np.complex128)
    if control_ops.shape[0] != pulse.n_channels:
        raise ValueError(
            f"{control_ops.shape[0]} control operators for "
            f"{pulse.n_channels} pulse channels")
    if control_ops.shape[1:] != h_static.shape:
        raise ValueError("control operator dimension mismatch")
    slices = _kernels.propagate_slices(
        h_static, control_ops, pulse.amplitudes, pulse.tau_s)
    return SubsystemTrajectory(block, slices, _kernels.cumulative_left(slices))


def end_propagator(h_static, control_ops, pulse):
    """Final-time propagator only (no cached products)."""
    slices = _kernels.propagate_slices(
        np.asarray(h_static, dtype=np.complex128),
        np.asarray(control_ops, dtype=np.complex128),
        pulse.amplitudes, pulse.tau_s)
    out = slices[0]
    for m in range(1, slices.shape[0]):
        out = slices[m] @ out
    return out


@dataclass
class VanLoanGenerators:
    """Lifted generators for one block pair.

    ``a_static`` and ``a_controls`` are the two blocks' drift and control
    operators embedded on the pair space (block k's factors first, then
    block j's); ``h_pair`` is the inter-block coupling.  The lifted static
    generator is ``[[a_static, h_pair], [0, a_static]]`` and each lifted
    control is block-diagonal.
    """

    pair: tuple
    a_static: np.ndarray       # (D, D)
    h_pair: np.ndarray         # (D, D)
    a_controls: np.ndarray     # (C, D, D)
    lifted_static: np.ndarray = field(init=False)
    lifted_controls: np.ndarray = field(init=False)

    def __post_init__(self):
        d = self.a_static.shape[0]
        big = np.zeros((2 * d, 2 * d), dtype=np.complex128)
        big[:d, :d] = self.a_static
        big[d:, d:] = self.a_static
        big[:d, d:] = self.h_pair
        self.lifted_static = big
        n_c = self.a_controls.shape[0]
        lifted = np.zeros((n_c, 2 * d, 2 * d), dtype=np.complex128)
        lifted[:, :d, :d] = self.a_controls
        lifted[:, d:, d:] = self.a_controls
        self.lifted_controls = lifted

    @property
    def dim(self):
        return self.a_static.shape[0]


def van_loan_generators(h_k, h_j, h_pair, ops_k, ops_j, pair=(0, 1)):
    """Build the lifted generators for blocks with drifts h_k, h_j."""
    h_k = np.asarray(h_k, dtype=np.complex128)
    h_j = np.asarray(h_j, dtype=np.complex128)
    h_pair = np.asarray(h_pair, dtype=np.complex128)
    ops_k = np.asarray(ops_k, dtype=np.complex128)
    ops_j = np.asarray(ops_j, dtype=np.complex128)
    dk, dj = h_k.shape[0], h_j.shape[0]
    if h_pair.shape != (dk * dj, dk * dj):
        raise ValueError(
            f"pair coupling has shape {h_pair.shape}, expected {(dk * dj,) * 2}")
    if ops_k.shape[0] != ops_j.shape[0]:
        raise ValueError("blocks must share the channel list")
    eye_k = np.eye(dk, dtype=np.complex128)
    eye_j = np.eye(dj, dtype=np.complex128)
    a_static = kron(h_k, eye_j) + kron(eye_k, h_j)
    a_controls = np.stack([
        kron(ops_k[c], eye_j) + kron(eye_k, ops_j[c])
        for c in range(ops_k.shape[0])
    ])
    return VanLoanGenerators(pair, a_static, h_pair, a_controls)


@dataclass
class VanLoanState:
    """Lifted-propagator trajectory for one block pair."""

    pair: tuple
    generators: VanLoanGenerators
    slices: np.ndarray     # (M, 2D, 2D)
    forward: np.ndarray    # (M, 2D, 2D)

    @property
    def dim(self):
        return self.generators.dim

    @property
    def final(self):
        return self.forward[-1]

    @property
    def pair_propagator(self):
        """(1,1) block of the final lifted propagator: U_k(T) x U_j(T)."""
        d = self.dim
        return self.forward[-1][:d, :d]

    @property
    def response(self):
        """(1,2) block: first-order response of U(T) to the pair coupling."""
        d = self.dim
        return self.forward[-1][:d, d:]


def propagate_pair(generators, pulse):
    """Integrate the lifted equation over all slices; V(0) is the identity."""
    if generators.a_controls.shape[0] != pulse.n_channels:
        raise ValueError(
            f"{generators.a_controls.shape[0]} control operators for "
            f"{pulse.n_channels} pulse channels")
    slices = _kernels.propagate_slices(
        generators.lifted_static, generators.lifted_controls,
        pulse.amplitudes, pulse.tau_s)
    return VanLoanState(generators.pair, generators, slices,
                        _kernels.cumulative_left(slices))


def pair_end_propagator(generators, pulse, epsilon=0.0):
    """End propagator of the pair dynamics with the coupling scaled by
    ``epsilon`` (epsilon=0 gives the unperturbed pair propagator)."""
    h = generators.a_static + epsilon * generators.h_pair
    return end_propagator(h, generators.a_controls, pulse)


def directional_derivative_quadrature(generators, pulse, subdivisions):
    """Midpoint-rule evaluation of -i U(T) \\int U(t)^dag H_pair U(t) dt.

    Uses exact sub-propagators within each slice; the quadrature error
    falls quadratically in the subdivision count.  Independent cross-check
    for the (1,2) block of the lifted propagator.
    """
    if subdivisions < 1:
        raise ValueError("need at least one subdivision per slice")
    h_pair = generators.h_pair
    d = generators.dim
    tau = pulse.tau_s
    delta = tau / subdivisions
    acc = np.zeros((d, d), dtype=np.complex128)
    p_cum = np.eye(d, dtype=np.complex128)
    amps = pulse.amplitudes
    for m in range(pulse.n_slices):
        h_m = generators.a_static + np.tensordot(
            amps[m], generators.a_controls, axes=(0, 0))
        step = _kernels.expm(-1j * delta * h_m)
        half = _kernels.expm(-0.5j * delta * h_m)
        for _ in range(subdivisions):
            w = half @ p_cum
            acc += delta * (w.conj().T @ h_pair @ w)
            p_cum = step @ p_cum
    return -1j * (p_cum @ acc)


def propagator_frechet(a, e):
    """Directional derivative of expm at ``a`` along ``e``:
    the (1,2) block of expm([[a, e], [0, a]])."""
    a = np.asarray(a, dtype=np.complex128)
    e = np.asarray(e, dtype=np.complex128)
    if a.shape != e.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"incompatible shapes {a.shape} and {e.shape}")
    n = a.shape[0]
    aug = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    aug[:n, :n] = a
    aug[n:, n:] = a
    aug[:n, n:] = e
    return _kernels.expm(aug)[:n, n:]


def slice_derivative_exact(h_slice, dh, tau):
    """d/du expm(-i (h_slice + u dh) tau) at u=0, via the augmented block
    exponential (exact, no first-order-in-tau truncation)."""
    return propagator_frechet(-1j * tau * np.asarray(h_slice, dtype=np.complex128),
                              -1j * tau * np.asarray(dh, dtype=np.complex128))
