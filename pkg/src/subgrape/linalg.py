"""Dense complex-matrix primitives shared by every other module.

Matrices are plain ``numpy.ndarray`` with dtype complex128.  The matrix
exponential is a degree-13 Pade approximant with scaling and squaring
(compiled kernel when available); everything else delegates to numpy.
"""

import numpy as np

from . import _kernels

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


def kron(a, b):
    """Kronecker product."""
    return np.kron(np.asarray(a, dtype=np.complex128),
                   np.asarray(b, dtype=np.complex128))


def expm(a):
    """Matrix exponential of a square complex matrix."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {a.shape}")
    return _kernels.expm(a)


def dagger(a):
    """Conjugate transpose."""
    return np.asarray(a).conj().T


def trace_inner(a, b):
    """Tr(a @ b^dagger) = sum_ij a_ij * conj(b_ij)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.vdot(b.ravel(), a.ravel()))


def frob_norm_sq(a):
    """Squared Frobenius norm, sum |a_ij|^2."""
    a = np.asarray(a)
    return float(np.vdot(a.ravel(), a.ravel()).real)


def unitarity_defect(u):
    """Frobenius norm of u @ u^dagger - I."""
    u = np.asarray(u)
    d = u.shape[0]
    return float(np.linalg.norm(u @ u.conj().T - np.eye(d)))


def embed_local(op, sites, n_sites):
    """Place a local operator on the given qubit sites of an n-qubit register.

    ``op`` has dimension 2^len(sites) and its tensor factors correspond to
    ``sites`` in ascending index order; identity acts everywhere else.
    """
    op = np.asarray(op, dtype=np.complex128)
    sites = list(sites)
    k = len(sites)
    if len(set(sites)) != k:
        raise ValueError(f"duplicate sites in {sites}")
    if sites != sorted(sites):
        raise ValueError(f"sites must be ascending, got {sites}")
    if any(s < 0 or s >= n_sites for s in sites):
        raise ValueError(f"sites {sites} out of range for {n_sites} qubits")
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} sites")
    if k == n_sites:
        return op.copy()
    rest = [q for q in range(n_sites) if q not in sites]
    full = np.kron(op, np.eye(2 ** (n_sites - k), dtype=np.complex128))
    tensor = full.reshape([2] * (2 * n_sites))
    inv = np.argsort(sites + rest)
    perm = list(inv) + [n_sites + i for i in inv]
    d = 2**n_sites
    return np.ascontiguousarray(tensor.transpose(perm).reshape(d, d))


def random_unitary(dim, rng):
    """Haar-ish random unitary from the QR decomposition of a Gaussian matrix."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))
