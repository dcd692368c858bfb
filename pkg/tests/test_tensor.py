import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bosecorr.tensor import NumericError, ShapeError, contract, keep_count, truncated_svd


def jacobi_singular_values(m, sweeps=60, tol=1e-15):
    """One-sided Jacobi: rotate column pairs until mutually orthogonal."""
    a = np.array(m, dtype=complex)
    n = a.shape[1]
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = np.vdot(a[:, p], a[:, p]).real
                beta = np.vdot(a[:, q], a[:, q]).real
                g = np.vdot(a[:, p], a[:, q])
                if abs(g) <= tol * np.sqrt(alpha * beta):
                    continue
                off = max(off, abs(g) / np.sqrt(alpha * beta))
                # Hermitian 2x2 [[alpha, g], [g*, beta]] diagonalized by a complex rotation
                phase = g / abs(g)
                zeta = (beta - alpha) / (2 * abs(g))
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1 + zeta * zeta)) if zeta != 0 else 1.0
                c = 1 / np.sqrt(1 + t * t)
                s = c * t
                ap = a[:, p].copy()
                a[:, p] = c * ap - s * np.conj(phase) * a[:, q]
                a[:, q] = s * phase * ap + c * a[:, q]
        if off < tol:
            break
    return np.sort(np.linalg.norm(a, axis=0))[::-1]


def test_contract_identity():
    np.testing.assert_array_equal(contract(np.eye(2), np.eye(2), (1, 0)), np.eye(2))


def test_contract_dot_product():
    v = np.array([3.0, 4.0])
    assert contract(v, v, (0, 0)) == 25.0


def test_contract_matches_triple_loop(rng):
    a = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5))
    ref = np.zeros((3, 5), dtype=complex)
    for i in range(3):
        for j in range(5):
            for k in range(4):
                ref[i, j] += a[i, k] * b[k, j]
    assert np.abs(contract(a, b, (1, 0)) - ref).max() < 1e-13


def test_contract_shape_order(rng):
    a = rng.normal(size=(2, 3, 4))
    b = rng.normal(size=(4, 5, 3))
    out = contract(a, b, [(1, 2), (2, 0)])
    assert out.shape == (2, 5)
    np.testing.assert_allclose(out, np.einsum("ijk,klj->il", a, b), atol=1e-13)


def test_contract_mismatch():
    with pytest.raises(ShapeError):
        contract(np.ones((2, 3)), np.ones((4, 2)), (1, 0))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31))
def test_contract_associative(p, q, r, s, seed):
    g = np.random.default_rng(seed)
    a, b, c = g.normal(size=(p, q)), g.normal(size=(q, r)), g.normal(size=(r, s))
    left = contract(contract(a, b, (1, 0)), c, (1, 0))
    right = contract(a, contract(b, c, (1, 0)), (1, 0))
    assert np.abs(left - right).max() < 1e-12 * max(1.0, np.abs(left).max())


def test_svd_identity():
    u, s, v, w = truncated_svd(np.eye(4), 0.0, 4)
    np.testing.assert_allclose(s, np.ones(4))
    assert w == 0.0


def test_svd_cutoff_drops_tiny_value():
    # dropping 1e-9 leaves relative weight 1e-18 / (1 + 1e-18) < 1e-12
    res = truncated_svd(np.diag([1.0, 1e-9]), 1e-12, 2)
    assert len(res.S) == 1
    assert res.discarded_weight == pytest.approx(1e-18, rel=1e-6)


def test_svd_cutoff_keeps_when_ratio_too_large():
    res = truncated_svd(np.diag([1.0, 1e-3]), 1e-12, 2)
    assert len(res.S) == 2


def test_svd_top_values_match_jacobi(rng):
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    res = truncated_svd(m, 0.0, 3)
    ref = jacobi_singular_values(m)
    assert np.abs(res.S - ref[:3]).max() < 1e-10
    assert res.discarded_weight == pytest.approx((ref[3:] ** 2).sum() / (ref**2).sum(), rel=1e-10)


def test_svd_reconstruction_and_orthonormality(rng):
    m = rng.normal(size=(7, 5)) + 1j * rng.normal(size=(7, 5))
    u, s, v, w = truncated_svd(m, 0.0)
    assert np.abs((u * s) @ v - m).max() < 1e-10
    assert np.abs(u.conj().T @ u - np.eye(5)).max() < 1e-10
    assert np.abs(v @ v.conj().T - np.eye(5)).max() < 1e-10
    assert w == 0.0


def test_svd_spectrum_sorted_nonnegative(rng):
    s = truncated_svd(rng.normal(size=(8, 8)), 0.0).S
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 8))
def test_discarded_weight_monotone(seed, n):
    g = np.random.default_rng(seed)
    m = g.normal(size=(n, n)) * np.logspace(0, -6, n)
    by_chi = [truncated_svd(m, 0.0, k).discarded_weight for k in range(1, n + 1)]
    assert all(b <= a + 1e-15 for a, b in zip(by_chi, by_chi[1:]))
    by_eps = [truncated_svd(m, e, n).discarded_weight for e in (0.0, 1e-12, 1e-8, 1e-4, 1e-1)]
    assert all(b >= a - 1e-15 for a, b in zip(by_eps, by_eps[1:]))


def test_keep_count_rules():
    s = np.array([1.0, 0.1, 0.01])
    assert keep_count(s, 0.0, 3)[0] == 3
    assert keep_count(s, 0.0, 2)[0] == 2
    assert keep_count(s, 0.5, 3)[0] == 1
    assert keep_count(np.zeros(3), 1e-3, 3) == (1, 0.0)


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_svd_rejects_nonfinite(bad):
    m = np.eye(3)
    m[1, 2] = bad
    with pytest.raises(NumericError):
        truncated_svd(m)


def test_svd_argument_checks():
    with pytest.raises(ValueError):
        truncated_svd(np.eye(2), eps=1.0)
    with pytest.raises(ValueError):
        truncated_svd(np.eye(2), chi_max=0)
    with pytest.raises(ShapeError):
        truncated_svd(np.ones(3))


def test_svd_deterministic(rng):
    m = rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20))
    a, b = truncated_svd(m, 1e-6, 10), truncated_svd(m, 1e-6, 10)
    assert np.array_equal(a.U, b.U) and np.array_equal(a.S, b.S) and np.array_equal(a.V, b.V)
