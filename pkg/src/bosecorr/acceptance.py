"""Built-in acceptance suite shared by ``bosecorr verify`` and the test-suite.

Every criterion reads its tolerances from ``data/acceptance.ini`` (or a
user-supplied copy) and returns a `CriterionResult` with the measured values.
Engine runs go through `runner.cached_table`, so criteria that share a
configuration share the run.
"""

from __future__ import annotations

import configparser
import math
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import analysis, convergence, ed, oracles
from .model import ModelParams, build_local_operators, build_trotter_gates, build_two_site_hamiltonian, compose_schedule, exp_hermitian
from .runner import cached_table
from .table import SimulationConfig, table_from_grid
from .tensor import truncated_svd

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"


@dataclass
class CriterionResult:
    key: str
    title: str
    status: str
    measured: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    detail: str = ""
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status != FAIL

    def line(self) -> str:
        return f"[{self.status}] criterion {self.key}: {self.title} | {self.detail} ({self.seconds:.1f} s)"

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "title": self.title,
            "status": self.status,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "detail": self.detail,
            "seconds": self.seconds,
        }


def load_tolerances(text: str | None = None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if text is None:
        text = resources.files("bosecorr").joinpath("data/acceptance.ini").read_text()
    cp.read_string(text)
    return cp


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",")]


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


def _grid(t_end: float, dt: float) -> np.ndarray:
    return np.round(np.arange(0.0, t_end + dt / 2, dt), 12)


# --- engine-backed criteria ---------------------------------------------------


def c1_short_time(sec):
    tau = sec.getfloat("tau")
    atol = sec.getfloat("atol")
    measured = {}
    for g in _floats(sec["gammas"]):
        cfg = convergence.parameter_table(g, tau_end=tau)
        t = cached_table(cfg)
        k = int(np.argmin(np.abs(t.tau - tau)))
        law = float(oracles.short_time_ctd(g, t.tau[k]))
        measured[f"gamma={g:g}"] = {"ell": float(t.ctd[k]), "law": law, "err": abs(float(t.ctd[k]) - law)}
    worst = max(m["err"] for m in measured.values())
    return _status(worst < atol), measured, {"atol": atol}, f"max |ell - law| = {worst:.2e} (< {atol:g})"


def _closed_form_rel(sec, limit):
    g = sec.getfloat("gamma")
    rtol = sec.getfloat("rtol")
    cfg = convergence.parameter_table(g, tau_end=sec.getfloat("tau_end"))
    t = cached_table(cfg)
    sel = t.tau > 0
    ref = oracles.ctd_closed_form(limit, t.tau[sel])
    rel = np.abs(t.ctd[sel] - ref) / ref
    i = int(np.argmax(rel))
    q = convergence.q_ratio(t)
    measured = {"max_rel": float(rel[i]), "at_tau": float(t.tau[sel][i]), "tau_max": q.tau_max,
                "trigger": q.trigger, "config": cfg.to_dict()}
    return _status(rel[i] < rtol), measured, {"rtol": rtol}, (
        f"max rel err {rel[i]:.2e} at tau={t.tau[sel][i]:.2f} (< {rtol:g}); Q: tau_max {q.tau_max:.2f} ({q.trigger})")


def c2_gamma_inf(sec):
    return _closed_form_rel(sec, oracles.GAMMA_INF)


def c3_gamma_zero(sec):
    return _closed_form_rel(sec, oracles.gamma_to_zero(sec.getfloat("gamma")))


def c4_ed(sec):
    g, L, n_max = sec.getfloat("gamma"), sec.getint("L"), sec.getint("n_max")
    atol = sec.getfloat("atol")
    cfg = SimulationConfig(gamma=g, delta=sec.getfloat("delta"), n_max=n_max, eps=sec.getfloat("eps"),
                           chi_max=512, tau_end=sec.getfloat("tau_end"), d_max=2)
    it = cached_table(cfg)
    ref = ed.ed_table(L, g, it.tau, 2, n_max=n_max)
    if ref.meta["excluded"]:
        return FAIL, {"excluded": ref.meta["excluded"]}, {"atol": atol}, "ED pairs not light-cone isolated"
    diff = np.abs(it.G - ref.G)
    worst = float(diff.max())
    measured = {"max_abs_G1": float(diff[:, 0].max()), "max_abs_G2": float(diff[:, 1].max())}
    return _status(worst < atol), measured, {"atol": atol}, f"max |G_iTEBD - G_ED| = {worst:.2e} (< {atol:g})"


# --- analytic-table criteria --------------------------------------------------


def _analytic_table(limit, t_end, d_max, dt):
    tau = _grid(t_end, dt)
    return table_from_grid(tau, oracles.correlation_grid(limit, tau, np.arange(1, d_max + 1)))


def c5_front_velocity(sec):
    atol, dt = sec.getfloat("atol"), sec.getfloat("dtau")
    lz = oracles.gamma_to_zero(sec.getfloat("gamma_zero"))
    v_inf = analysis.fit_front_velocity(analysis.detect_front(_analytic_table(oracles.GAMMA_INF, 4.5, 12, dt))).params["v"]
    v_zero = analysis.fit_front_velocity(analysis.detect_front(_analytic_table(lz, 6.5, 30, dt))).params["v"]
    e_inf = abs(v_inf - sec.getfloat("v_inf"))
    e_zero = abs(v_zero - sec.getfloat("v_zero"))
    ok = e_inf <= atol and e_zero <= atol
    return _status(ok), {"v_inf": v_inf, "v_zero": v_zero}, {"atol": atol}, f"v(inf, d<=12) = {v_inf:.3f}, v(0, d<=30) = {v_zero:.3f}"


def c6_front_decay(sec):
    atol, dt = sec.getfloat("atol"), sec.getfloat("dtau")
    lz = oracles.gamma_to_zero(0.0063)
    d_inf, d_zero = sec.getint("d_max_inf"), sec.getint("d_max_zero")
    eta_inf = analysis.fit_front_decay(analysis.detect_front(
        _analytic_table(oracles.GAMMA_INF, d_inf / 4 + 3, d_inf, dt))).params["eta"]
    # only the largest distances are needed for the gamma -> 0 fit
    tau = _grid(d_zero / 6 + 3, dt)
    G = np.zeros((tau.size, d_zero))
    G[:, d_zero - 9:] = oracles.correlation_grid(lz, tau, np.arange(d_zero - 8, d_zero + 1))
    eta_zero = analysis.fit_front_decay(analysis.detect_front(table_from_grid(tau, G))).params["eta"]
    e_inf = abs(eta_inf - sec.getfloat("eta_inf"))
    e_zero = abs(eta_zero - sec.getfloat("eta_zero"))
    ok = e_inf <= atol and e_zero <= atol
    measured = {"eta_inf": eta_inf, "eta_zero": eta_zero, "window_inf": [d_inf - 8, d_inf], "window_zero": [d_zero - 8, d_zero]}
    return _status(ok), measured, {"atol": atol}, f"eta(inf) = {eta_inf:.3f}, eta(0) = {eta_zero:.3f}"


def c7a_norm_limit(sec):
    tau, target, rtol = sec.getfloat("tau"), sec.getfloat("target"), sec.getfloat("rtol")
    n = float(oracles.norm_closed_form(oracles.GAMMA_INF, tau))
    rel = abs(n - target) / target
    return _status(rel <= rtol), {"norm": n, "rel": rel}, {"rtol": rtol}, f"N(inf, tau={tau:g}) = {n:.4f} vs {target:g}, rel {rel:.3f}"


def _converged_run(gamma, tau_cap, chi_max=None):
    over = {"tau_end": tau_cap}
    if chi_max is not None:
        over["chi_max"] = chi_max
    cfg = convergence.parameter_table(gamma, **over)
    t = cached_table(cfg, stop_on_q=convergence.Q_THRESHOLD)
    return cfg, t, convergence.q_ratio(t)


def c7b_norm_flat(sec):
    rtol = sec.getfloat("flat_rtol")
    cfg, t, q = _converged_run(sec.getfloat("gamma"), sec.getfloat("tau_cap"))
    t_max = q.tau_max if q.trigger == convergence.END_TRIGGER else t.tau[t.tau < q.tau_max][-1]
    w = t.window(0.75 * t_max, t_max)
    N = w.norm
    spread = float((N.max() - N.min()) / N.mean())
    measured = {"tau_max": q.tau_max, "trigger": q.trigger, "window": [float(w.tau[0]), float(w.tau[-1])],
                "N_min": float(N.min()), "N_max": float(N.max()), "spread": spread}
    return _status(spread <= rtol), measured, {"rtol": rtol}, (
        f"N spread {spread:.3f} over tau in [{w.tau[0]:.2f}, {w.tau[-1]:.2f}] (<= {rtol:g}), tau_max {q.tau_max:.2f} ({q.trigger})")


def c8_beta_trend(sec):
    lz = oracles.gamma_to_zero(sec.getfloat("gamma"))
    t0 = sec.getfloat("t_start")
    betas = []
    for T in _floats(sec["t_ends"]):
        tau = np.linspace(t0, T, int(round((T - t0) / 0.01)) + 1)
        betas.append(analysis.fit_power_law(tau, oracles.ctd_closed_form(lz, tau)).params["beta"])
    inc = all(b1 > b0 for b0, b1 in zip(betas, betas[1:]))
    ok = inc and betas[-1] > sec.getfloat("beta_min") and betas[-1] < 1
    return _status(ok), {"beta": betas}, {"beta_min": sec.getfloat("beta_min")}, "beta = " + ", ".join(f"{b:.4f}" for b in betas)


def c9_chaotic(sec):
    gammas = _floats(sec["gammas"])
    t0, t1 = sec.getfloat("t_start"), sec.getfloat("t_end")
    runs = {}
    # the chaotic point decides whether the criterion applies at all
    order = [0.18] + [g for g in gammas if g != 0.18]
    for g in order:
        cfg, t, q = _converged_run(g, t1)
        runs[g] = (t, q)
        if g == 0.18 and q.tau_max < t1:
            return SKIPPED, {"tau_max_0.18": q.tau_max, "trigger": q.trigger}, {"t_end": t1}, (
                f"tau_max(0.18) = {q.tau_max:.2f} < {t1:g} under the Q criterion at chi_max={cfg.chi_max}")
    betas = {}
    for g, (t, q) in runs.items():
        end = min(t1, q.tau_max)
        betas[g] = analysis.fit_power_law(t.tau, t.ctd, (t0, end)).params["beta"]
    b = betas[0.18]
    ok = b < betas[0.02] and b < betas[100.0] and b < sec.getfloat("beta_max")
    return _status(ok), {"beta": {f"{g:g}": v for g, v in betas.items()}}, {"beta_max": sec.getfloat("beta_max")}, (
        "beta: " + ", ".join(f"{g:g} -> {v:.3f}" for g, v in betas.items()))


def c10_convergence(sec):
    g, cap = sec.getfloat("gamma"), sec.getfloat("tau_cap")
    _, lo, q_lo = _converged_run(g, cap, sec.getint("chi_low"))
    _, hi, q_hi = _converged_run(g, cap, sec.getint("chi_high"))
    t_max = q_lo.tau_max
    if q_lo.trigger == convergence.Q_TRIGGER:
        t_max = lo.tau[lo.tau < q_lo.tau_max][-1]
    bad = convergence.compare_tables(lo, hi, t_max=t_max)
    ok = q_lo.tau_max <= q_hi.tau_max and bad is None
    measured = {"tau_max_low": q_lo.tau_max, "trigger_low": q_lo.trigger, "tau_max_high": q_hi.tau_max,
                "trigger_high": q_hi.trigger, "first_violation": bad}
    return _status(ok), measured, {"rel": convergence.REL_TOLERANCE}, (
        f"tau_max(128) = {q_lo.tau_max:.2f} ({q_lo.trigger}), tau_max(512) = {q_hi.tau_max:.2f} ({q_hi.trigger}), "
        f"first 0.5% violation: {bad}")


def trotter_order(delta: float = 0.1, gamma: float = 1.0, n_max: int = 3) -> dict:
    """Observed order of the one-step error from delta-halving.

    Two problems: the isolated two-site system split into hopping and
    interaction, and a four-site open chain split into even and odd bonds.
    """
    p = ModelParams(gamma, n_max)
    bd, b, n = build_local_operators(p)
    eye = np.eye(p.dim)
    out = {}
    hop = -(np.kron(bd, b) + np.kron(b, bd))
    onsite = 0.5 * p.U * (n @ (n - eye))
    inter = np.kron(onsite, eye) + np.kron(eye, onsite)
    psi = np.zeros(p.dim ** 2, dtype=complex)
    psi[1 * p.dim + 1] = 1.0
    out["two_site"] = _order({"even": hop, "odd": inter}, psi, delta)

    # four sites: bonds (0,1), (2,3) even and (1,2) odd; edge sites count once
    def bond(i, L=4):
        wl = 1.0 if i == 0 else 0.5
        wr = 1.0 if i + 1 == L - 1 else 0.5
        h = build_two_site_hamiltonian(p, (wl, wr))
        return np.kron(np.kron(np.eye(p.dim ** i), h), np.eye(p.dim ** (L - i - 2)))

    psi4 = np.zeros(p.dim ** 4, dtype=complex)
    psi4[sum(p.dim ** k for k in range(4))] = 1.0
    out["four_site"] = _order({"even": bond(0) + bond(2), "odd": bond(1)}, psi4, delta)
    return out


def _order(parts, psi, delta):
    H = parts["even"] + parts["odd"]
    errs = []
    for dt in (delta, delta / 2):
        exact = exp_hermitian(H, dt) @ psi
        errs.append(np.linalg.norm(compose_schedule(parts, dt) @ psi - exact))
    # local error ~ dt^(order+1)
    return math.log2(errs[0] / errs[1]) - 1.0


def c11_properties(sec):
    rng = np.random.default_rng(7)
    m = rng.normal(size=(40, 30)) + 1j * rng.normal(size=(40, 30))
    r = truncated_svd(m, 0.0, 30)
    recon = float(np.abs((r.U * r.S) @ r.V - m).max())
    unit = 0.0
    for g, nm in ((0.01, 3), (1.0, 5), (100.0, 8)):
        for gate in build_trotter_gates(ModelParams(g, nm), 0.05):
            u = gate.matrix
            unit = max(unit, float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()))
    orders = trotter_order()
    cfg = convergence.parameter_table(1.0, tau_end=1.0)
    t = cached_table(cfg)
    dens = np.asarray(t.meta["diagnostics"]["density"])
    dens_err = float(np.abs(dens - 1.0).max())
    cone = 0.0
    for i, tau in enumerate(t.tau):
        d0 = math.ceil(6 * tau) + 5
        peak = t.G[i].max()
        if d0 <= t.d_max and peak > 0:
            cone = max(cone, float(t.G[i, d0 - 1:].max() / peak))
    checks = {
        "svd_reconstruction": recon < sec.getfloat("svd_atol"),
        "gate_unitarity": unit < sec.getfloat("unitary_atol"),
        "trotter_order": min(orders.values()) >= sec.getfloat("trotter_order"),
        "density": dens_err < sec.getfloat("density_atol"),
        "light_cone": cone <= convergence.Q_THRESHOLD,
    }
    measured = {"svd_reconstruction": recon, "gate_unitarity": unit, "trotter_order": orders,
                "density_err": dens_err, "light_cone_ratio": cone, "checks": checks}
    failed = [k for k, v in checks.items() if not v]
    detail = (f"recon {recon:.1e}, unitarity {unit:.1e}, order {min(orders.values()):.2f}, "
              f"density {dens_err:.1e}, cone ratio {cone:.1e}") + (f"; failed: {failed}" if failed else "")
    return _status(not failed), measured, dict(sec), detail


CRITERIA = [
    ("1", "short-time universal law", "c1_short_time", c1_short_time, True),
    ("2", "gamma->inf closed-form CTD", "c2_gamma_inf", c2_gamma_inf, False),
    ("3", "gamma->0 closed-form CTD", "c3_gamma_zero", c3_gamma_zero, True),
    ("4", "ED cross-oracle", "c4_ed", c4_ed, True),
    ("5", "front velocity targets", "c5_front_velocity", c5_front_velocity, True),
    ("6", "front decay exponents", "c6_front_decay", c6_front_decay, True),
    ("7a", "norm limit at tau=10", "c7_norm", c7a_norm_limit, True),
    ("7b", "engine norm saturation", "c7_norm", c7b_norm_flat, False),
    ("8", "power-law beta trend", "c8_beta_trend", c8_beta_trend, True),
    ("9", "chaotic-regime beta ordering", "c9_chaotic", c9_chaotic, False),
    ("10", "convergence protocol", "c10_convergence", c10_convergence, False),
    ("11", "numerical property suite", "c11_properties", c11_properties, True),
]


def run_criterion(key: str, tol=None) -> CriterionResult:
    tol = load_tolerances() if tol is None else tol
    for k, title, section, fn, _ in CRITERIA:
        if k == key:
            t0 = time.perf_counter()
            status, measured, tolerance, detail = fn(tol[section])
            return CriterionResult(k, title, status, measured, tolerance, detail, time.perf_counter() - t0)
    raise KeyError(f"unknown criterion {key!r}")


def run_all(quick: bool = False, keys=None, tol=None, report=None) -> list[CriterionResult]:
    tol = load_tolerances() if tol is None else tol
    results = []
    for k, *_rest, is_quick in CRITERIA:
        if keys is not None and k not in keys:
            continue
        if quick and not is_quick:
            continue
        res = run_criterion(k, tol)
        results.append(res)
        if report is not None:
            report(res)
    return results
