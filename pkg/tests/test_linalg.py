import numpy as np
import pytest

from subgrape import _kernels
from subgrape.linalg import (PAULI, SIGMA_X, SIGMA_Y, SIGMA_Z, dagger,
                             embed_local, expm, frob_norm_sq, kron,
                             random_unitary, trace_inner, unitarity_defect)

I2 = np.eye(2, dtype=complex)


# ---------------------------------------------------------------------------
# kron
# ---------------------------------------------------------------------------

def test_kron_identity():
    assert np.array_equal(kron(I2, I2), np.eye(4))


def test_kron_sigma_z_pair():
    assert np.array_equal(kron(SIGMA_Z, SIGMA_Z),
                          np.diag([1, -1, -1, 1]).astype(complex))


def test_kron_matches_loop_definition(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    got = kron(a, b)
    want = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    want[2 * i + k, 2 * j + l] = a[i, j] * b[k, l]
    # vectorized complex multiplies may round differently by one ulp
    assert np.abs(got - want).max() <= 1e-15 * np.abs(want).max()


def test_kron_associative(rng):
    mats = [rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            for _ in range(3)]
    a, b, c = mats
    lhs = kron(kron(a, b), c)
    rhs = kron(a, kron(b, c))
    assert np.abs(lhs - rhs).max() <= 1e-15 * np.abs(lhs).max()


# ---------------------------------------------------------------------------
# expm
# ---------------------------------------------------------------------------

def taylor_expm(a, terms=40):
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ a / k
        out = out + term
    return out


def test_expm_zero():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))


def test_expm_pauli_rotation():
    got = expm(-1j * (np.pi / 2) * SIGMA_X)
    assert np.abs(got - (-1j * SIGMA_X)).max() < 1e-12


def test_expm_matches_taylor_series(rng):
    z = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    a = 0.4 * (z - z.conj().T)  # anti-Hermitian
    got = expm(a)
    want = taylor_expm(a)
    assert np.abs(got - want).max() < 1e-10


def test_expm_large_norm_scaling(rng):
    z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = z + z.conj().T
    a = -1j * h  # norm well above the Pade threshold
    got = expm(a)
    # exp(a) = exp(a/8)^8 with the small factor checked against Taylor
    small = taylor_expm(a / 8.0, terms=60)
    want = np.linalg.matrix_power(small, 8)
    assert np.abs(got - want).max() < 1e-10 * np.abs(want).max()


def test_expm_rejects_non_square():
    with pytest.raises(ValueError):
        expm(np.zeros((2, 3)))


def test_expm_anti_hermitian_is_unitary(rng):
    for d in (2, 5, 9):
        z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        u = expm(z - z.conj().T)
        assert unitarity_defect(u) < 1e-10


def test_expm_backends_agree(rng):
    backends = _kernels.available_backends()
    if len(backends) < 2:
        pytest.skip("compiled kernel not built")
    z = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    a = -1j * (z + z.conj().T)
    outs = [mod.expm(a) for mod in backends.values()]
    assert np.abs(outs[0] - outs[1]).max() < 1e-13


# ---------------------------------------------------------------------------
# trace_inner / frob_norm_sq
# ---------------------------------------------------------------------------

def test_trace_inner_identity():
    for d in (2, 4, 7):
        assert trace_inner(np.eye(d), np.eye(d)) == pytest.approx(d)


def test_trace_inner_pauli_orthogonality():
    assert trace_inner(SIGMA_X, SIGMA_Y) == pytest.approx(0.0)


def test_trace_inner_matches_direct_sum(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    direct = sum(a[i, j] * np.conj(b[i, j]) for i in range(4) for j in range(4))
    assert trace_inner(a, b) == pytest.approx(direct)
    assert trace_inner(a, b) == pytest.approx(np.trace(a @ dagger(b)))


def test_trace_inner_shape_mismatch():
    with pytest.raises(ValueError):
        trace_inner(np.eye(2), np.eye(3))


def test_frob_norm_sq_basics():
    assert frob_norm_sq(np.zeros((3, 3))) == 0.0
    assert frob_norm_sq(np.eye(5)) == pytest.approx(5.0)


def test_frob_norm_sq_of_unitary_is_dim(rng):
    for d in (2, 4, 8):
        u = random_unitary(d, rng)
        assert unitarity_defect(u) < 1e-12
        assert frob_norm_sq(u) == pytest.approx(d, abs=1e-10)


def test_trace_inner_self_equals_frob_norm_exactly(rng):
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    ti = trace_inner(a, a)
    assert ti.imag == 0.0
    assert ti.real == frob_norm_sq(a)


# ---------------------------------------------------------------------------
# embed_local
# ---------------------------------------------------------------------------

def test_embed_single_site():
    assert np.array_equal(embed_local(SIGMA_Z, [0], 2), kron(SIGMA_Z, I2))
    assert np.array_equal(embed_local(SIGMA_Z, [1], 2), kron(I2, SIGMA_Z))


def test_embed_two_sites_with_gap():
    got = embed_local(kron(SIGMA_Z, SIGMA_Z), [0, 2], 3)
    want = np.diag([1, -1, 1, -1, -1, 1, -1, 1]).astype(complex)
    assert np.abs(got - want).max() == 0.0


def test_embed_identity_is_identity():
    for k in range(4):
        assert np.array_equal(embed_local(I2, [k], 4), np.eye(16))


def test_embed_rejects_bad_input():
    with pytest.raises(ValueError):
        embed_local(I2, [0, 0], 3)
    with pytest.raises(ValueError):
        embed_local(I2, [5], 3)
    with pytest.raises(ValueError):
        embed_local(np.eye(4), [0], 3)
    with pytest.raises(ValueError):
        embed_local(np.eye(4), [2, 0], 3)


def test_embed_disjoint_sites_multiply(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    lhs = embed_local(a, [1], 4) @ embed_local(b, [0, 3], 4)
    # same operator assembled in one shot: sites (0,1,3) in ascending order
    combined = embed_local(_arrange(a, b), [0, 1, 3], 4)
    assert np.abs(lhs - combined).max() < 1e-12


def _arrange(a, b):
    """Operator on sites (0,1,3): b's first factor on 0, a on 1, b's second on 3."""
    bt = b.reshape(2, 2, 2, 2)  # [row0, row1, col0, col1]
    return np.einsum("kmln,ij->kimljn", bt, a).reshape(8, 8)


def test_pauli_table():
    assert np.array_equal(PAULI["x"], SIGMA_X)
    assert np.array_equal(PAULI["y"], SIGMA_Y)
    assert np.array_equal(PAULI["z"], SIGMA_Z)


# ---------------------------------------------------------------------------
# kernel slice loop
# ---------------------------------------------------------------------------

def test_propagate_slices_matches_expm(rng):
    d = 6
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = z + z.conj().T
    ops = np.stack([np.diag(rng.normal(size=d)).astype(complex),
                    (z + z.conj().T) * 0.1])
    amps = rng.normal(size=(5, 2))
    tau = 0.07
    got = _kernels.propagate_slices(h, ops, amps, tau)
    for m in range(5):
        w = expm(-1j * tau * (h + amps[m, 0] * ops[0] + amps[m, 1] * ops[1]))
        assert np.abs(got[m] - w).max() < 1e-12


def test_cumulative_left_products(rng):
    mats = rng.normal(size=(4, 3, 3)) + 1j * rng.normal(size=(4, 3, 3))
    cum = _kernels.cumulative_left(mats)
    assert np.abs(cum[0] - mats[0]).max() == 0.0
    want = mats[0]
    for m in range(1, 4):
        want = mats[m] @ want
        assert np.abs(cum[m] - want).max() < 1e-12


def test_kernel_backends_propagate_identically(rng):
    backends = _kernels.available_backends()
    if len(backends) < 2:
        pytest.skip("compiled kernel not built")
    d = 5
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = z + z.conj().T
    ops = np.stack([h * 0.3, np.diag(rng.normal(size=d)).astype(complex)])
    amps = rng.normal(size=(7, 2))
    outs = [mod.propagate_slices(h, ops, amps, 0.05)
            for mod in backends.values()]
    assert np.abs(outs[0] - outs[1]).max() < 1e-13
