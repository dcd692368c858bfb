"""Closed forms for the two integrable limits of the Bose-Hubbard quench.

Non-interacting limit (``gamma -> inf``): free bosons; the averaged density
correlation is a one-dimensional Bessel integral and CTD and norm reduce to
generalized hypergeometric functions.

Strong-coupling limit (``gamma -> 0+``): doublon-holon picture; everything is
a finite combination of ``J_d(6 tau)`` with a ``cos(tau/gamma)`` beat on the
nearest-neighbour term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.special

#: |z0|, location of the first maximum of the Airy function Ai (first zero of Ai').
AIRY_Z0 = 1.018792971647471
EULER_GAMMA = float(np.euler_gamma)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


class PrecisionError(ArithmeticError):
    """A series could not reach the requested accuracy in double precision."""


@dataclass(frozen=True)
class LimitKind:
    tag: str
    gamma: float | None = None

    def __post_init__(self):
        if self.tag not in ("gamma_to_zero", "gamma_to_infinity"):
            raise ValueError(f"unknown limit {self.tag!r}")
        if self.tag == "gamma_to_zero" and not (self.gamma is not None and self.gamma > 0):
            raise ValueError("gamma_to_zero needs a positive gamma")

    @property
    def is_zero(self) -> bool:
        return self.tag == "gamma_to_zero"


GAMMA_INF = LimitKind("gamma_to_infinity")


def gamma_to_zero(gamma: float) -> LimitKind:
    return LimitKind("gamma_to_zero", float(gamma))


@dataclass(frozen=True)
class SeriesControl:
    atol: float = 1e-12
    max_terms: int = 2000

    def __post_init__(self):
        if not self.atol > 0:
            raise ValueError("tolerance must be positive")


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

def bessel_j(n, x):
    """Bessel function of the first kind ``J_n(x)`` for integer order n >= 0."""
    return scipy.special.jv(n, x)


def hyp_pfq_series(a, b, x: float, control: SeriesControl = SeriesControl()) -> float:
    """Sum the ``pFq(a; b; x)`` power series for ``p <= q``.

    Raises `PrecisionError` when the series does not converge within
    ``control.max_terms`` or when cancellation between large terms would
    leave an absolute error above ``control.atol``.
    """
    for bj in b:
        if bj <= 0 and float(bj).is_integer():
            raise ValueError(f"lower parameter {bj} is a non-positive integer")
    x = float(x)
    term = 1.0
    total = 1.0
    biggest = 1.0
    for k in range(control.max_terms):
        num = x
        for ai in a:
            num *= ai + k
        den = float(k + 1)
        for bj in b:
            den *= bj + k
        term *= num / den
        total += term
        biggest = max(biggest, abs(term))
        if abs(term) < control.atol * 1e-3 and k > abs(x) ** (1.0 / (len(b) + 1 - len(a))):
            break
    else:
        raise PrecisionError(f"series did not converge in {control.max_terms} terms (x={x})")
    if biggest * np.finfo(float).eps * 4 > control.atol:
        raise PrecisionError(
            f"cancellation: largest term {biggest:.3g} exceeds what atol={control.atol:g} allows"
        )
    return total


def hyp_2f3(a1, a2, b1, b2, b3, x, control: SeriesControl = SeriesControl()) -> float:
    """Generalized hypergeometric ``2F3(a1, a2; b1, b2, b3; x)`` by its series."""
    return hyp_pfq_series((a1, a2), (b1, b2, b3), x, control)


def hyp_0f1_regularized(b: float, x, control: SeriesControl = SeriesControl()):
    """Regularized ``0F1(; b; x) / Gamma(b)``.

    Small |x| uses the power series; large negative x uses
    ``(z/2)^(1-b) J_(b-1)(z)`` with ``z = 2 sqrt(-x)``, where the series
    would cancel catastrophically.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    flat_x, flat_out = x.ravel(), out.ravel()
    for i, xi in enumerate(flat_x):
        if abs(xi) <= 4.0:
            flat_out[i] = hyp_pfq_series((), (b,), xi, control) / math.gamma(b)
        elif xi < 0:
            z = 2.0 * math.sqrt(-xi)
            flat_out[i] = (z / 2.0) ** (1.0 - b) * scipy.special.jv(b - 1.0, z)
        else:
            z = 2.0 * math.sqrt(xi)
            flat_out[i] = (z / 2.0) ** (1.0 - b) * scipy.special.iv(b - 1.0, z)
    return out if out.ndim else float(out)


def _bessel_ratio(tau):
    """``J1(6 tau) / (3 tau)``, equal to 0F1~(2; -9 tau^2); tends to 1 at tau = 0."""
    tau = np.asarray(tau, dtype=float)
    x = 6.0 * tau
    small = np.abs(x) < 6e-3
    xs = np.where(small, 1.0, x)
    r = np.where(small, 1.0 - x**2 / 8.0 + x**4 / 192.0, 2.0 * scipy.special.j1(xs) / xs)
    return r if r.ndim else float(r)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _panel_nodes(a: float, b: float, n_panels: int):
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def correlation_grid_gamma_inf(taus, distances) -> np.ndarray:
    """Non-interacting G_d on a grid: array of shape ``(len(taus), len(distances))``.

    ``G_d(tau) = (2/pi) int_0^pi J0^2[4 tau sin(theta/2)] cos(theta d) dtheta``,
    by composite 24-point Gauss-Legendre panels, one panel per oscillation
    of the fastest component.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    ds = np.atleast_1d(np.asarray(distances, dtype=int))
    if np.any(ds < 1):
        raise ValueError("distances must be >= 1")
    if np.any(taus < 0):
        raise ValueError("tau must be >= 0")
    n_panels = int(math.ceil((ds.max() + 4.0 * taus.max()) / 2.0)) + 4
    theta, w = _panel_nodes(0.0, math.pi, n_panels)
    # int cos(theta d) = 0 for d >= 1, so subtracting 1 is exact and keeps tau = 0 at zero
    j0sq = scipy.special.j0(4.0 * taus[:, None] * np.sin(theta[None, :] / 2.0)) ** 2 - 1.0
    kern = (w[:, None] * np.cos(theta[:, None] * ds[None, :])) * (2.0 / math.pi)
    return j0sq @ kern


def correlation_gamma_inf(d: int, tau: float) -> float:
    """Non-interacting averaged correlation at distance ``d >= 1``."""
    return float(correlation_grid_gamma_inf([tau], [d])[0, 0])


def _ctd_inf_quadrature(tau: float) -> float:
    # Euler reduction of the 2F3: 4 tau^2 2F3(..) = (8 tau/pi) int cos^2 J0(z) J1(z)/sin, z = 4 tau sin
    n_panels = int(math.ceil(4.0 * tau / math.pi)) + 4
    phi, w = _panel_nodes(0.0, math.pi / 2.0, n_panels)
    s = np.sin(phi)
    z = 4.0 * tau * s
    f = np.cos(phi) ** 2 * scipy.special.j0(z) * (scipy.special.j1(z) / z) * 4.0 * tau
    return float((8.0 * tau / math.pi) * np.dot(w, f))


def _bessel_sq_mean(tau: float) -> float:
    """``2F3(1/2, 1/2; 1, 1, 1; -16 tau^2) = (2/pi) int_0^(pi/2) J0^2(4 tau sin phi) dphi``."""
    n_panels = int(math.ceil(8.0 * tau / math.pi)) + 4
    phi, w = _panel_nodes(0.0, math.pi / 2.0, n_panels)
    return float((2.0 / math.pi) * np.dot(w, scipy.special.j0(4.0 * tau * np.sin(phi)) ** 2))


# series is exact to ~1e-12 up to here; beyond it the Bessel integral takes over
_SERIES_TAU_MAX = 1.0


# ---------------------------------------------------------------------------
# strong-coupling limit
# ---------------------------------------------------------------------------

def correlation_gamma_zero(d: int, tau, gamma: float):
    """Strong-coupling averaged correlation at distance ``d >= 1``.

    ``d = 1``: ``4 gamma^2 [R^2 - 2 R cos(tau/gamma) + 1]`` with
    ``R = J1(6 tau)/(3 tau)``; ``d >= 2``: ``(4/9) d^2 gamma^2 J_d(6 tau)^2 / tau^2``.
    """
    if d < 1:
        raise ValueError("distance must be >= 1")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    tau = np.asarray(tau, dtype=float)
    if d == 1:
        r = _bessel_ratio(tau)
        out = 4.0 * gamma**2 * (r * r - 2.0 * r * np.cos(tau / gamma) + 1.0)
    else:
        safe = np.where(tau == 0, 1.0, tau)
        jd = scipy.special.jv(d, 6.0 * safe)
        out = np.where(tau == 0, 0.0, (4.0 / 9.0) * d * d * gamma**2 * jd * jd / safe**2)
    return out if out.ndim else float(out)


def correlation_grid_gamma_zero(taus, distances, gamma: float) -> np.ndarray:
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    return np.column_stack([correlation_gamma_zero(int(d), taus, gamma) for d in distances])


def correlation_grid(limit: LimitKind, taus, distances) -> np.ndarray:
    """G_d on a (tau, d) grid for either limit."""
    if limit.is_zero:
        return correlation_grid_gamma_zero(taus, distances, limit.gamma)
    return correlation_grid_gamma_inf(taus, distances)


# ---------------------------------------------------------------------------
# CTD and norm
# ---------------------------------------------------------------------------

def short_time_ctd(gamma: float, tau):
    """Universal short-time CTD ``4 tau^2 - (6 + 1/(3 gamma^2)) tau^4``."""
    tau = np.asarray(tau, dtype=float)
    return 4.0 * tau**2 - (6.0 + 1.0 / (3.0 * gamma**2)) * tau**4


def ctd_closed_form(limit: LimitKind, tau):
    """Exact CTD in an integrable limit. Vectorized over `tau`."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be >= 0")
    if limit.is_zero:
        g = limit.gamma
        x = 6.0 * tau
        j0, j1 = scipy.special.j0(x), scipy.special.j1(x)
        r = _bessel_ratio(tau)
        out = 4.0 * g * g * (
            1.0
            + (1.0 + 48.0 * tau**2) * j0**2
            - 8.0 * tau * j0 * j1
            + (1.0 / 3.0 + 48.0 * tau**2) * j1**2
            - 2.0 * r * np.cos(tau / g)
        )
        return out if out.ndim else float(out)
    flat = [
        4.0 * t * t * hyp_2f3(0.5, 1.5, 2.0, 2.0, 2.0, -16.0 * t * t)
        if t <= _SERIES_TAU_MAX
        else _ctd_inf_quadrature(t)
        for t in tau.ravel()
    ]
    out = np.array(flat).reshape(tau.shape)
    return out if out.ndim else float(out)


def ctd_asymptotic(limit: LimitKind, tau):
    """Leading large-tau behaviour of the CTD."""
    tau = np.asarray(tau, dtype=float)
    if limit.is_zero:
        # the constant 1 is the large-tau mean of the nearest-neighbour term
        return 4.0 * limit.gamma**2 * (1.0 + (16.0 * tau + 1.0 / (6.0 * tau)) / math.pi)
    return 16.0 / math.pi**2 * tau - (
        np.log(tau) + 6.0 * math.log(2.0) + EULER_GAMMA - 0.5
    ) / (8.0 * math.pi**2 * tau)


def norm_closed_form(limit: LimitKind, tau):
    """Exact norm ``N = sum_d G_d`` in an integrable limit.

    ``gamma -> inf``: ``1 - 2F3(1/2, 1/2; 1, 1, 1; -16 tau^2)``;
    ``gamma -> 0+``: ``8 gamma^2 [1 - cos(tau/gamma) 0F1~(2; -9 tau^2)]``.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be >= 0")
    if limit.is_zero:
        g = limit.gamma
        out = 8.0 * g * g * (1.0 - np.cos(tau / g) * hyp_0f1_regularized(2.0, -9.0 * tau**2))
        return out if np.ndim(out) else float(out)
    flat = [
        1.0 - (hyp_2f3(0.5, 0.5, 1.0, 1.0, 1.0, -16.0 * t * t) if t <= _SERIES_TAU_MAX else _bessel_sq_mean(t))
        for t in tau.ravel()
    ]
    out = np.array(flat).reshape(tau.shape)
    return out if out.ndim else float(out)


def norm_asymptotic(limit: LimitKind, tau):
    tau = np.asarray(tau, dtype=float)
    if limit.is_zero:
        return 8.0 * limit.gamma**2 + 0.0 * tau
    return 1.0 - (np.log(tau) + EULER_GAMMA + 6.0 * math.log(2.0)) / (2.0 * math.pi**2 * tau)


# ---------------------------------------------------------------------------
# correlation front
# ---------------------------------------------------------------------------

def front_time(limit: LimitKind, d):
    """Airy estimate of the time of the first maximum of G_d (valid for d >> 1)."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 1):
        raise ValueError("distance must be >= 1")
    if limit.is_zero:
        out = ((d / 2.0) ** (1.0 / 3.0) * AIRY_Z0 + d) / 6.0
    else:
        out = ((2.0 * d) ** (1.0 / 3.0) * AIRY_Z0 + d) / 4.0
    return out if out.ndim else float(out)


def asymptotic_front_velocity(limit: LimitKind) -> float:
    return 6.0 if limit.is_zero else 4.0


def instantaneous_velocity(limit: LimitKind, d, approximate: bool = False):
    """``1 / (tau_{d+1} - tau_d)``, or its large-d expansion if `approximate`."""
    d = np.asarray(d, dtype=float)
    if approximate:
        if limit.is_zero:
            return 6.0 * (1.0 - AIRY_Z0 / (2.0 ** (1.0 / 3.0) * 3.0) * d ** (-2.0 / 3.0))
        return 4.0 * (1.0 - 2.0 ** (1.0 / 3.0) * AIRY_Z0 / 3.0 * d ** (-2.0 / 3.0))
    return 1.0 / (front_time(limit, d + 1) - front_time(limit, d))


def windowed_velocity(limit: LimitKind, d: int, span: int) -> float:
    """Average front velocity ``span / (tau_{d+span} - tau_d)``."""
    return span / (front_time(limit, d + span) - front_time(limit, d))


def front_decay_reference(limit: LimitKind) -> float:
    """Exponent eta of the front-amplitude decay ``G_max(d) ~ d^-eta``."""
    return 2.0 / 3.0 if limit.is_zero else 1.0
