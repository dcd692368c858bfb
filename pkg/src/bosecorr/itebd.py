"""Infinite TEBD on a two-site unit cell.

The state is kept in Hastings' right-canonical form: site tensors ``B[i]`` of
shape ``(chi_left, d, chi_right)`` and Schmidt values ``lam[i]`` on the bond
to the *left* of site ``i``. Bond updates never divide by Schmidt values.

Unit-cell site 0 is "A", site 1 is "B"; even gates act on the A-B bond and
odd gates on the B-A bond.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .model import EVEN, ModelParams, TwoSiteGate, build_local_operators
from .tensor import NumericError, truncated_svd


@dataclass
class InfiniteMPS:
    B: list  # two arrays (chi_l, d, chi_r)
    lam: list  # two real arrays; lam[i] sits left of site i
    tau: float = 0.0

    @property
    def bond_dims(self) -> tuple[int, int]:
        """(A-B bond, B-A bond) dimensions."""
        return len(self.lam[1]), len(self.lam[0])

    @property
    def phys_dim(self) -> int:
        return self.B[0].shape[1]

    def copy(self) -> "InfiniteMPS":
        return InfiniteMPS([b.copy() for b in self.B], [l.copy() for l in self.lam], self.tau)


@dataclass
class StepReport:
    tau: float
    bond_dims: tuple[int, int]
    discarded: tuple[float, float]  # max relative discarded weight on (A-B, B-A)
    wall_time: float


def product_state(occupations, n_max: int) -> InfiniteMPS:
    """Bond-dimension-one state with the given occupations on sites (A, B)."""
    d = n_max + 1
    B = []
    for occ in occupations:
        if not 0 <= occ <= n_max:
            raise ValueError(f"occupation {occ} outside [0, {n_max}]")
        t = np.zeros((1, d, 1), dtype=complex)
        t[0, occ, 0] = 1.0
        B.append(t)
    return InfiniteMPS(B, [np.ones(1), np.ones(1)], 0.0)


def init_unit_filling(params: ModelParams) -> InfiniteMPS:
    """The Fock state with one boson on every site."""
    return product_state((1, 1), params.n_max)


def apply_bond_gate(state: InfiniteMPS, gate, i: int, eps: float, chi_max: int) -> float:
    """Apply a two-site gate on the bond (i, i+1) in place; return discarded weight.

    `gate` is a ``(d, d, d, d)`` array indexed ``[out_l, out_r, in_l, in_r]``.
    """
    j = 1 - i
    Bi, Bj = state.B[i], state.B[j]
    chi_l, d, _ = Bi.shape
    chi_r = Bj.shape[2]
    theta = np.tensordot(Bi, Bj, axes=(2, 0))  # (a, p, q, c)
    theta = np.tensordot(gate, theta, axes=([2, 3], [1, 2]))  # (s, t, a, c)
    theta = theta.transpose(2, 0, 1, 3)  # (a, s, t, c)
    m = (state.lam[i][:, None, None, None] * theta).reshape(chi_l * d, d * chi_r)
    try:
        res = truncated_svd(m, eps, chi_max)
    except NumericError as exc:
        raise NumericError(f"non-finite amplitudes at tau={state.tau:.6g}") from exc
    s = res.S
    norm = np.linalg.norm(s)
    k = len(s)
    y = res.V.reshape(k, d, chi_r)
    new_i = np.tensordot(theta, y.conj(), axes=([2, 3], [1, 2])) / norm  # (a, s, k)
    state.B[i] = new_i
    state.B[j] = y
    state.lam[j] = s / norm
    return res.discarded_weight


def evolve_step(
    state: InfiniteMPS, gates: list[TwoSiteGate], eps: float, chi_max: int
) -> tuple[InfiniteMPS, StepReport]:
    """Advance `state` (in place) through one full Trotter step."""
    t0 = time.perf_counter()
    disc = [0.0, 0.0]
    dt = 0.0
    for g in gates:
        i = 0 if g.parity == EVEN else 1
        w = apply_bond_gate(state, g.as_tensor(), i, eps, chi_max)
        disc[i] = max(disc[i], w)
        if g.parity == EVEN:
            dt += g.fraction * g.delta
    state.tau += dt
    report = StepReport(state.tau, state.bond_dims, (disc[0], disc[1]), time.perf_counter() - t0)
    return state, report


def _site_env(lam: np.ndarray, B: np.ndarray, op_diag: np.ndarray | None) -> np.ndarray:
    """Left environment after one site: sum_a lam_a^2 B[a,p,b] op_p conj(B[a,p,c])."""
    Bw = B * (lam[:, None, None] ** 2)
    if op_diag is not None:
        Bw = Bw * op_diag[None, :, None]
    chi_r = B.shape[2]
    return Bw.reshape(-1, chi_r).T @ B.reshape(-1, chi_r).conj()


def measure_density(state: InfiniteMPS) -> np.ndarray:
    """<n> on unit-cell sites (A, B)."""
    n = np.arange(state.phys_dim, dtype=float)
    out = []
    for i in (0, 1):
        env = _site_env(state.lam[i], state.B[i], n)
        out.append(np.trace(env).real)
    return np.array(out)


def measure_fluctuation(state: InfiniteMPS) -> np.ndarray:
    """<n^2> - <n>^2 on unit-cell sites (A, B)."""
    n = np.arange(state.phys_dim, dtype=float)
    dens = measure_density(state)
    out = []
    for i in (0, 1):
        n2 = np.trace(_site_env(state.lam[i], state.B[i], n * n)).real
        out.append(n2 - dens[i] ** 2)
    return np.array(out)


def measure_correlations(state: InfiniteMPS, d_max: int) -> np.ndarray:
    """G_d for d = 1..d_max in a single transfer-matrix sweep.

    G_d is |<n_k n_{k+d}> - <n_k><n_{k+d}>| averaged over both unit-cell
    offsets k. Cost is O(d_max chi^3 d).
    """
    n = np.arange(state.phys_dim, dtype=float)
    dens = measure_density(state)
    G = np.zeros(d_max)
    for i in (0, 1):
        env = _site_env(state.lam[i], state.B[i], n)
        for dist in range(1, d_max + 1):
            s = (i + dist) % 2
            B = state.B[s]
            chi_l, d, chi_r = B.shape
            x = (env.T @ B.reshape(chi_l, d * chi_r)).reshape(chi_l, d, chi_r)
            nn = np.vdot(B * n[None, :, None], x).real
            G[dist - 1] += 0.5 * abs(nn - dens[i] * dens[s])
            if dist < d_max:
                env = x.reshape(chi_l * d, chi_r).T @ B.reshape(chi_l * d, chi_r).conj()
    return G


def measure_correlation(state: InfiniteMPS, d: int) -> float:
    """G_d at a single distance ``d >= 1``."""
    if d < 1:
        raise ValueError("distance must be >= 1")
    return float(measure_correlations(state, d)[d - 1])


def transfer_spectral_radius(state: InfiniteMPS) -> float:
    """Dominant eigenvalue modulus of the two-site transfer matrix.

    Equals one for a normalized state. Intended for diagnostics at modest chi.
    """
    B0, B1 = state.B
    chi = B0.shape[0]

    def matvec(v):
        r = v.reshape(chi, chi)
        for B in (B1, B0):
            x = np.tensordot(B, r, axes=(2, 0))  # (a, p, c')
            r = np.tensordot(x, B.conj(), axes=([1, 2], [1, 2]))
        return r.ravel()

    if chi * chi <= 4:
        m = np.column_stack([matvec(e) for e in np.eye(chi * chi)])
        return float(np.max(np.abs(np.linalg.eigvals(m))))
    op = scipy.sparse.linalg.LinearOperator((chi * chi, chi * chi), matvec=matvec, dtype=complex)
    vals = scipy.sparse.linalg.eigs(op, k=1, which="LM", return_eigenvectors=False, v0=np.eye(chi).ravel().astype(complex))
    return float(np.abs(vals[0]))


@dataclass
class EngineLog:
    reports: list = field(default_factory=list)

    @property
    def max_discarded(self) -> float:
        return max((max(r.discarded) for r in self.reports), default=0.0)
