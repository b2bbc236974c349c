"""Pure-numpy implementations of the hot numerical kernels.

Same algorithms as the compiled extension (``_core``): a degree-13 Pade
approximant with scaling and squaring for the matrix exponential, plus the
per-slice propagator loop built on top of it.  Used automatically when the
extension is unavailable or when ``SUBGRAPE_PURE_PYTHON`` is set.
"""

import numpy as np

BACKEND = "fallback"

# Pade-13 numerator/denominator coefficients (Higham 2005).
_B13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def expm(a):
    """exp(a) for a square complex matrix via Pade-13 scaling and squaring."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    n = a.shape[0]
    norm1 = float(np.abs(a).sum(axis=0).max()) if n else 0.0
    if norm1 == 0.0:
        return np.eye(n, dtype=np.complex128)
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
        a = a / (2.0**s)
    b = _B13
    eye = np.eye(n, dtype=np.complex128)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye)
    f = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        f = f @ f
    return f


def propagate_slices(h_static, ops, amps, tau):
    """Per-slice propagators exp(-i*(h_static + sum_c amps[m,c]*ops[c])*tau).

    h_static: (d, d); ops: (C, d, d); amps: (M, C).  Returns (M, d, d).
    """
    h_static = np.ascontiguousarray(h_static, dtype=np.complex128)
    ops = np.ascontiguousarray(ops, dtype=np.complex128)
    amps = np.ascontiguousarray(amps, dtype=np.float64)
    n_slices = amps.shape[0]
    d = h_static.shape[0]
    out = np.empty((n_slices, d, d), dtype=np.complex128)
    for m in range(n_slices):
        h = h_static + np.tensordot(amps[m], ops, axes=(0, 0))
        out[m] = expm(-1j * tau * h)
    return out


def cumulative_left(slices):
    """Running left-products P[m] = slices[m] @ ... @ slices[0]."""
    slices = np.ascontiguousarray(slices, dtype=np.complex128)
    out = np.empty_like(slices)
    out[0] = slices[0]
    for m in range(1, slices.shape[0]):
        out[m] = slices[m] @ out[m - 1]
    return out
