import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bosecorr import analysis as a
from bosecorr import oracles as o
from bosecorr.table import CorrelationTable, table_from_grid

LZ = o.gamma_to_zero(0.0063)


def _grid(t_end, dt):
    return np.round(np.arange(0.0, t_end + dt / 2, dt), 10)


def _analytic(limit, t_end, d_max, dt=0.01):
    tau = _grid(t_end, dt)
    return table_from_grid(tau, o.correlation_grid(limit, tau, np.arange(1, d_max + 1)))


@pytest.fixture(scope="module")
def zero_table():
    return _analytic(LZ, 7.0, 40)


@pytest.fixture(scope="module")
def inf_table():
    return _analytic(o.GAMMA_INF, 5.0, 16)


# ---------------------------------------------------------------- CTD and norm

def test_ctd_and_norm_small_example():
    t = CorrelationTable([0.0, 1.0], [[0.0, 0.0, 0.0], [0.1, 0.02, 0.01]])
    assert a.compute_ctd(t)[1] == pytest.approx(0.1 + 0.04 + 0.03)
    N, ell_n = a.compute_norm_and_normalized_ctd(t)
    assert N[1] == pytest.approx(0.13)
    assert ell_n[1] == pytest.approx(0.17 / 0.13)
    assert np.isnan(ell_n[0])


def test_uniform_profile_mean_distance():
    D = 20
    t = CorrelationTable([0.0, 1.0], np.vstack([np.zeros(D), np.full(D, 0.3)]))
    _, ell_n = a.compute_norm_and_normalized_ctd(t)
    assert ell_n[1] == pytest.approx((D + 1) / 2)


def test_normalized_ctd_masked_below_floor():
    t = CorrelationTable([0.0, 1.0, 2.0], [[0.0, 0.0], [1e-8, 0.0], [0.1, 0.1]])
    _, ell_n = a.compute_norm_and_normalized_ctd(t, noise_floor=1e-6)
    assert np.isnan(ell_n[:2]).all() and ell_n[2] == pytest.approx(1.5)


@given(st.floats(1e-6, 1e6))
@settings(max_examples=30, deadline=None)
def test_normalized_ctd_scale_invariant(c):
    rng = np.random.default_rng(3)
    G = rng.random((4, 6))
    t = CorrelationTable(np.arange(4.0), G)
    s = CorrelationTable(np.arange(4.0), c * G)
    np.testing.assert_allclose(
        a.compute_norm_and_normalized_ctd(s)[1], a.compute_norm_and_normalized_ctd(t)[1], rtol=1e-12
    )


def test_normalized_profiles_peak_at_one(zero_table):
    p = a.normalized_profiles(zero_table)
    np.testing.assert_allclose(p.max(axis=0), 1.0)


# ---------------------------------------------------------------- fronts

def test_triangular_pulse_peak_and_width():
    tau = np.round(np.arange(0, 4.0001, 0.01), 10)
    g = np.maximum(0.0, 1.0 - np.abs(tau - 2.0))
    front = a.detect_front(CorrelationTable(tau, g[:, None]))
    assert front.tau[0] == pytest.approx(2.0, abs=0.01)
    assert front.fwhm[0] == pytest.approx(1.0, abs=0.02)


def test_gaussian_fwhm():
    tau = np.round(np.arange(0, 6.0001, 0.02), 10)
    s = 0.4
    g = np.exp(-0.5 * ((tau - 3.013) / s) ** 2)
    front = a.detect_front(CorrelationTable(tau, g[:, None]))
    assert front.tau[0] == pytest.approx(3.013, abs=2e-3)
    assert front.fwhm[0] == pytest.approx(2 * np.sqrt(2 * np.log(2)) * s, rel=5e-3)


def test_rising_only_front_uses_twice_rising_width():
    tau = np.round(np.arange(0, 3.0001, 0.01), 10)
    g = np.where(tau < 1.0, tau, 1.0 - 0.1 * (tau - 1.0))
    front = a.detect_front(CorrelationTable(tau, g[:, None]))
    assert front.fwhm[0] == pytest.approx(2 * (front.tau[0] - 0.5), abs=0.02)


def test_boundary_and_noise_exclusions():
    tau = np.linspace(0, 1, 11)
    G = np.column_stack([tau, np.sin(np.pi * tau) * 1e-9, np.sin(np.pi * tau)])
    front = a.detect_front(CorrelationTable(tau, G), noise_floor=1e-6)
    assert front.excluded == {1: "boundary", 2: "below_noise"}
    assert list(front.d) == [3]


def test_front_time_gamma_zero(zero_table):
    front = a.detect_front(zero_table)
    sel = front.d >= 15
    assert sel.sum() >= 20
    ref = o.front_time(LZ, front.d[sel])
    np.testing.assert_allclose(front.tau[sel], ref, rtol=0.02)


def test_front_time_gamma_inf(inf_table):
    front = a.detect_front(inf_table)
    sel = front.d >= 8
    ref = o.front_time(o.GAMMA_INF, front.d[sel])
    np.testing.assert_allclose(front.tau[sel], ref, rtol=0.02)
    assert np.all(np.diff(front.tau) > 0)


def test_front_velocity_fit_round_trip():
    d = np.arange(1, 21)
    tau = (d - 1.5) / 4.2
    front = a.FrontTrace(d, tau, np.ones(d.size), np.ones(d.size))
    fit = a.fit_front_velocity(front)
    assert fit.params["v"] == pytest.approx(4.2)
    assert fit.params["d0"] == pytest.approx(1.5)
    assert fit.window == (12, 20) and fit.n_points == 9
    np.testing.assert_allclose(a.front_residuals(front, fit), 0.0, atol=1e-12)


def test_front_decay_fit_round_trip():
    d = np.arange(5, 40)
    front = a.FrontTrace(d, d / 6.0, 0.3 * d ** -0.7, np.ones(d.size))
    fit = a.fit_front_decay(front)
    assert fit.params["eta"] == pytest.approx(0.7)
    assert fit.params["c"] == pytest.approx(0.3)


def test_few_fronts_flagged_or_rejected():
    d = np.arange(1, 5)
    front = a.FrontTrace(d, d / 4.0, np.ones(4), np.ones(4))
    assert a.fit_front_velocity(front).flags == ["only_4_points"]
    with pytest.raises(a.InsufficientDataError):
        a.fit_front_velocity(a.FrontTrace(d[:2], d[:2] / 4.0, np.ones(2), np.ones(2)))


# ---------------------------------------------------------------- power laws

@given(st.floats(1e-4, 10.0), st.floats(0.2, 2.5))
@settings(max_examples=30, deadline=None)
def test_power_law_round_trip(alpha, beta):
    tau = np.linspace(0.5, 5.0, 40)
    fit = a.fit_power_law(tau, alpha * tau ** beta)
    assert fit.params["beta"] == pytest.approx(beta, abs=1e-9)
    assert fit.params["alpha"] == pytest.approx(alpha, rel=1e-9)


def test_power_law_errors():
    tau = np.linspace(0, 1, 11)
    with pytest.raises(a.InsufficientDataError):
        a.fit_power_law(tau, tau + 1, window=(0.5, 0.7))
    with pytest.raises(a.FitDomainError):
        a.fit_power_law(tau, tau)
    with pytest.raises(a.FitDomainError):
        a.fit_power_law(tau[1:], -tau[1:])


def test_power_law_window_inclusive():
    tau = np.round(np.arange(0, 5.0001, 0.05), 10)
    fit = a.fit_power_law(tau, 1 + tau, window=(2.2, 3.3))
    assert fit.window == (2.2, 3.3) and fit.n_points == 23


def test_beta_gamma_zero_sub_ballistic_and_rising():
    tau = _grid(10.0, 0.05)
    ell = o.ctd_closed_form(LZ, tau)
    b1 = a.fit_power_law(tau, ell, (2.2, 5.5)).params["beta"]
    b2 = a.fit_power_law(tau, ell, (5.5, 10.0)).params["beta"]
    assert b1 < 1.0 and b2 < 1.0
    assert b2 > b1


def test_beta_gamma_inf_ballistic():
    tau = _grid(3.9, 0.05)
    ell = o.ctd_closed_form(o.GAMMA_INF, tau)
    assert a.fit_power_law(tau, ell, (2.2, 3.9)).params["beta"] == pytest.approx(1.0, abs=0.03)


@pytest.mark.parametrize("limit,window", [(LZ, (2.2, 5.5)), (o.GAMMA_INF, (10.0, 20.0))])
def test_normalized_ctd_exponent_tracks_ctd_once_norm_saturates(limit, window):
    tau = _grid(window[1], 0.05)
    ell = o.ctd_closed_form(limit, tau)
    N = o.norm_closed_form(limit, tau)
    sel = tau > 0
    b = a.fit_power_law(tau[sel], ell[sel], window).params["beta"]
    bn = a.fit_power_law(tau[sel], ell[sel] / N[sel], window).params["beta"]
    assert abs(b - bn) < 0.05


# ---------------------------------------------------------------- saturation

def test_saturation_of_step_profile():
    tau = np.round(np.arange(0, 6.0001, 0.05), 10)
    g = np.where(tau < 1.0, np.sin(np.pi * tau / 2) ** 2, 0.0) + np.where(tau >= 1.0, 0.25 + 0.75 * np.exp(-8 * (tau - 1.0)), 0)
    t = CorrelationTable(tau, g[:, None])
    front = a.detect_front(t)
    val = a.saturation_value(t, front, 1, tau_max=6.0)
    assert val == pytest.approx(0.25, rel=0.02)


def test_saturation_undefined_cases():
    tau = np.linspace(0, 1, 11)
    t = CorrelationTable(tau, np.sin(np.pi * tau)[:, None])
    front = a.detect_front(t)
    assert a.saturation_value(t, front, 1) is None
    assert a.saturation_value(t, front, 2) is None


def test_saturation_gamma_zero_small():
    t = _analytic(LZ, 8.0, 6, dt=0.02)
    front = a.detect_front(t)
    for d in range(1, 5):
        val = a.saturation_value(t, front, d)
        assert val is None or val < 1e-3


# ---------------------------------------------------------------- worked examples

def test_ctd_hand_sums():
    z = CorrelationTable([0.0], np.zeros((1, 5)))
    assert a.compute_ctd(z)[0] == 0.0
    t = CorrelationTable([0.0], [[0.5, 0.25, 0.0, 0.0]])
    assert a.compute_ctd(t)[0] == pytest.approx(1.0, abs=1e-15)


def test_stored_ctd_and_norm_rederivable(zero_table):
    G = zero_table.G
    np.testing.assert_allclose(zero_table.ctd, (G * np.arange(1, G.shape[1] + 1)).sum(axis=1), atol=1e-12)
    np.testing.assert_allclose(zero_table.norm, G.sum(axis=1), atol=1e-12)


def test_quadratic_power_law_exact():
    tau = np.linspace(0.5, 4.0, 30)
    fit = a.fit_power_law(tau, 3 * tau ** 2)
    assert abs(fit.params["alpha"] - 3) < 1e-10 and abs(fit.params["beta"] - 2) < 1e-10
    assert all(v >= 0 for v in fit.stderr.values())


def test_beta_gamma_zero_rises_toward_one_to_tau_50():
    tau = _grid(50.0, 0.05)
    ell = o.ctd_closed_form(LZ, tau)
    betas = [a.fit_power_law(tau, ell, (2.2, e)).params["beta"] for e in (5.5, 10, 20, 30, 40, 50)]
    assert np.all(np.diff(betas) > 0)
    assert betas[-1] < 1.0


def test_quarter_speed_front():
    d = np.arange(1, 15)
    fit = a.fit_front_velocity(a.FrontTrace(d, d / 4.0, np.ones(d.size), np.ones(d.size)))
    assert fit.params["v"] == pytest.approx(4.0, abs=1e-12)


def test_inverse_distance_decay():
    d = np.arange(2, 30)
    fit = a.fit_front_decay(a.FrontTrace(d, d / 4.0, 1.0 / d, np.ones(d.size)))
    assert abs(fit.params["eta"] - 1.0) < 1e-10


def test_saturation_constant_tail():
    tau = np.round(np.arange(0, 5.0001, 0.02), 10)
    g = np.where(tau <= 1.0, 2 * np.sin(np.pi * tau / 2), 0.0)
    g = np.where((tau > 1.0) & (tau < 1.5), 2 - 3.4 * (tau - 1.0), g)
    g = np.where(tau >= 1.5, 0.3, g)
    t = CorrelationTable(tau, g[:, None])
    front = a.detect_front(t)
    assert a.saturation_value(t, front, 1) == pytest.approx(0.3, abs=1e-12)


def test_front_velocity_analytic_limits():
    v_inf = a.fit_front_velocity(a.detect_front(_analytic(o.GAMMA_INF, 4.5, 12))).params["v"]
    v_zero = a.fit_front_velocity(a.detect_front(_analytic(LZ, 6.5, 30))).params["v"]
    assert v_inf == pytest.approx(3.59, abs=0.1)
    assert v_zero == pytest.approx(5.82, abs=0.1)


def test_front_decay_gamma_inf():
    fit = a.fit_front_decay(a.detect_front(_analytic(o.GAMMA_INF, 18.0, 60)))
    assert fit.params["eta"] == pytest.approx(1.0, abs=0.05)


def test_scale_invariance_of_front_and_fits(inf_table):
    c = 37.5
    scaled = CorrelationTable(inf_table.tau, c * inf_table.G)
    f1, f2 = a.detect_front(inf_table), a.detect_front(scaled)
    np.testing.assert_allclose(f1.tau, f2.tau, rtol=1e-12)
    np.testing.assert_allclose(f2.g_max, c * f1.g_max, rtol=1e-12)
    assert a.fit_front_velocity(f2).params["v"] == pytest.approx(a.fit_front_velocity(f1).params["v"], rel=1e-12)
    assert a.fit_front_decay(f2).params["eta"] == pytest.approx(a.fit_front_decay(f1).params["eta"], rel=1e-10)
    sel = inf_table.tau > 0
    p1 = a.fit_power_law(inf_table.tau[sel], inf_table.ctd[sel]).params
    p2 = a.fit_power_law(scaled.tau[sel], scaled.ctd[sel]).params
    assert p2["alpha"] == pytest.approx(c * p1["alpha"], rel=1e-10)
    assert p2["beta"] == pytest.approx(p1["beta"], rel=1e-10)


def test_analytic_norm_at_tau_10_matches_closed_form():
    tau = np.array([0.0, 10.0])
    t = table_from_grid(tau, o.correlation_grid(o.GAMMA_INF, tau, np.arange(1, 61)))
    N, _ = a.compute_norm_and_normalized_ctd(t)
    assert N[1] == pytest.approx(float(o.norm_closed_form(o.GAMMA_INF, 10.0)), abs=1e-6)


def test_peak_ahead_of_light_cone_is_not_a_front():
    tau = np.round(np.arange(0, 2.0001, 0.05), 10)
    G = np.zeros((tau.size, 20))
    G[:, 19] = 1e-9 * np.exp(-((tau - 1.0) / 0.2) ** 2)
    G[:, 0] = np.exp(-((tau - 0.5) / 0.2) ** 2)
    front = a.detect_front(CorrelationTable(tau, G))
    assert front.excluded[20] == "outside_light_cone"
    assert 1 in front.d


# ---------------------------------------------------------------- engine data

def _converged(gamma, **over):
    from bosecorr import convergence
    from bosecorr.runner import cached_table
    cfg = convergence.parameter_table(gamma, **over)
    t = cached_table(cfg, stop_on_q=convergence.Q_THRESHOLD)
    q = convergence.q_ratio(t)
    conv = t.window(0.0, q.tau_max)
    return conv, a.detect_front(conv, float(q.sigma.max()))


@pytest.mark.slow
def test_engine_ctd_gamma_inf():
    from bosecorr import convergence
    from bosecorr.runner import cached_table
    t = cached_table(convergence.parameter_table(100.0, tau_end=1.5))
    i = int(np.flatnonzero(np.isclose(t.tau, 1.5))[0])
    ref = float(o.ctd_closed_form(o.GAMMA_INF, 1.5))
    assert abs(a.compute_ctd(t)[i] - ref) / ref < 0.01


@pytest.mark.slow
def test_engine_saturation_negligible_strong_coupling():
    from bosecorr import convergence
    from bosecorr.runner import cached_table
    t = cached_table(convergence.parameter_table(0.0063, tau_end=2.0))
    front = a.detect_front(t)
    vals = [a.saturation_value(t, front, d) for d in range(1, 5)]
    assert any(v is not None for v in vals)
    assert all(v is None or v < 1e-3 for v in vals)


@pytest.mark.slow
def test_engine_saturation_rises_with_gamma():
    sat = {}
    for g in (0.11, 0.18, 0.30):
        t, front = _converged(g, tau_end=3.3, chi_max=128)
        sat[g] = [a.saturation_value(t, front, d) for d in (2, 3, 4)]
    for k in range(3):
        col = [sat[g][k] for g in (0.11, 0.18, 0.30)]
        assert None not in col
        assert col[0] < col[1] < col[2]
