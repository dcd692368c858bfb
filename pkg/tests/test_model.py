import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bosecorr.acceptance import trotter_order
from bosecorr.model import (
    EVEN,
    ODD,
    ModelParams,
    build_local_operators,
    build_trotter_gates,
    build_two_site_hamiltonian,
    compose_schedule,
    exp_hermitian,
    suzuki4_schedule,
)


def basis_index(n_l, n_r, d):
    return n_l * d + n_r


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0.0, 3)
    with pytest.raises(ValueError):
        ModelParams(1.0, 0)
    assert ModelParams(0.25, 2).U == 4.0


def test_two_level_annihilator():
    _, b, _ = build_local_operators(ModelParams(1.0, 1))
    np.testing.assert_array_equal(b, [[0, 1], [0, 0]])


def test_number_operator_top_state():
    _, _, n = build_local_operators(ModelParams(1.0, 4))
    top = np.zeros(5)
    top[4] = 1
    np.testing.assert_array_equal(n @ top, 4 * top)


def test_commutator_below_cutoff():
    bd, b, n = build_local_operators(ModelParams(1.0, 6))
    comm = b @ bd - bd @ b
    np.testing.assert_allclose(comm[:6, :6], np.eye(6), atol=1e-14)
    np.testing.assert_allclose(bd @ b, n, atol=1e-14)


def test_hopping_on_unit_filling():
    p = ModelParams(1e12, 2)  # U -> 0
    h = build_two_site_hamiltonian(p)
    d = p.dim
    psi = np.zeros(d * d)
    psi[basis_index(1, 1, d)] = 1.0
    out = h @ psi
    expect = np.zeros(d * d)
    expect[basis_index(2, 0, d)] = expect[basis_index(0, 2, d)] = -np.sqrt(2)
    np.testing.assert_allclose(out, expect, atol=1e-10)


def test_interaction_diagonal():
    p = ModelParams(1.0, 2)
    h = build_two_site_hamiltonian(p)
    i = basis_index(2, 0, p.dim)
    # (U/2) * 2 * 1 * w with w = 1/2
    assert h[i, i] == pytest.approx(0.5)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(1, 6))
def test_hamiltonian_hermitian(gamma, n_max):
    h = build_two_site_hamiltonian(ModelParams(gamma, n_max))
    assert np.abs(h - h.conj().T).max() < 1e-12


def test_schedule_structure():
    sched = suzuki4_schedule()
    assert len(sched) == 11
    assert sched == sched[::-1]
    for parity in (EVEN, ODD):
        assert sum(f for p, f in sched if p == parity) == pytest.approx(1.0, abs=1e-14)
    # parities alternate once half-steps are merged
    assert all(a[0] != b[0] for a, b in zip(sched, sched[1:]))


def test_gate_first_order():
    p = ModelParams(0.7, 3)
    h = build_two_site_hamiltonian(p)
    delta = 1e-6
    for g in build_trotter_gates(p, delta):
        approx = np.eye(h.shape[0]) - 1j * h * g.fraction * delta
        assert np.abs(g.matrix - approx).max() < 1e-10


@pytest.mark.parametrize("gamma,n_max", [(0.01, 3), (1.0, 5), (100.0, 8)])
def test_gates_unitary(gamma, n_max):
    for g in build_trotter_gates(ModelParams(gamma, n_max), 0.05):
        u = g.matrix
        assert np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() < 1e-10


def test_gate_tensor_layout():
    p = ModelParams(1.0, 2)
    g = build_trotter_gates(p, 0.1)[0]
    t = g.as_tensor()
    d = p.dim
    assert t.shape == (d, d, d, d)
    assert t[1, 2, 0, 1] == g.matrix[1 * d + 2, 0 * d + 1]


def test_bad_delta():
    with pytest.raises(ValueError):
        build_trotter_gates(ModelParams(1.0, 2), 0.0)


def test_trotter_order_two_site():
    orders = trotter_order(delta=0.1)
    assert orders["two_site"] >= 3.8
    assert orders["four_site"] >= 3.8


def test_one_step_error_ratio_near_32():
    p = ModelParams(1.0, 3)
    bd, b, n = build_local_operators(p)
    eye = np.eye(p.dim)
    hop = -(np.kron(bd, b) + np.kron(b, bd))
    inter = 0.5 * p.U * (np.kron(n @ (n - eye), eye) + np.kron(eye, n @ (n - eye)))
    parts = {EVEN: hop, ODD: inter}
    errs = [np.abs(compose_schedule(parts, dt) - exp_hermitian(hop + inter, dt)).max() for dt in (0.1, 0.05)]
    assert 25 < errs[0] / errs[1] < 40


def test_exact_two_site_evolution_global_error():
    # error after unit time scales as delta^4
    p = ModelParams(1.0, 3)
    bd, b, n = build_local_operators(p)
    eye = np.eye(p.dim)
    hop = -(np.kron(bd, b) + np.kron(b, bd))
    inter = 0.5 * p.U * (np.kron(n @ (n - eye), eye) + np.kron(eye, n @ (n - eye)))
    psi = np.zeros(p.dim**2, dtype=complex)
    psi[basis_index(1, 1, p.dim)] = 1
    exact = exp_hermitian(hop + inter, 1.0) @ psi
    errs = []
    for steps in (10, 20):
        u = compose_schedule({EVEN: hop, ODD: inter}, 1.0 / steps)
        errs.append(np.linalg.norm(np.linalg.matrix_power(u, steps) @ psi - exact))
    assert np.log2(errs[0] / errs[1]) >= 3.8
