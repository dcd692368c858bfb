"""Bose-Hubbard chain: truncated local operators, bond Hamiltonian, Trotter gates.

Energies are in units of the tunneling amplitude (J = 1), so the on-site
repulsion is U = 1/gamma and times are tunneling times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Suzuki's fourth-order coefficient for the five-fold symmetric composition.
SUZUKI_P = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))

EVEN, ODD = "even", "odd"


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    n_max: int

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if int(self.n_max) < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def U(self) -> float:
        return 1.0 / self.gamma

    @property
    def dim(self) -> int:
        return self.n_max + 1


def build_local_operators(params: ModelParams):
    """Return ``(b_dag, b, n)`` as ``(n_max+1)``-dimensional real matrices."""
    d = params.dim
    b = np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1)
    n = np.diag(np.arange(d, dtype=float))
    return b.T.copy(), b, n


def build_two_site_hamiltonian(params: ModelParams, weights=(0.5, 0.5)) -> np.ndarray:
    """Two-site bond Hamiltonian as a ``(d*d, d*d)`` matrix.

    ``h = -(b^dag x b + b x b^dag) + U/2 [w_l n(n-1) x 1 + w_r 1 x n(n-1)]``.
    The default ``weights = (1/2, 1/2)`` counts every on-site term exactly once
    on the infinite chain, where each site touches two bonds.
    """
    bd, b, n = build_local_operators(params)
    eye = np.eye(params.dim)
    onsite = 0.5 * params.U * n @ (n - eye)
    hop = -(np.kron(bd, b) + np.kron(b, bd))
    w_l, w_r = weights
    return hop + w_l * np.kron(onsite, eye) + w_r * np.kron(eye, onsite)


def exp_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` through the eigendecomposition of Hermitian `h`."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def suzuki4_schedule() -> list[tuple[str, float]]:
    """Fourth-order even/odd schedule as ``(parity, fraction)`` pairs.

    Five symmetric second-order Strang steps with weights ``p, p, 1-4p, p, p``
    and adjacent even half-steps merged. The sequence is palindromic and each
    parity's fractions sum to one.
    """
    p = SUZUKI_P
    seq: list[tuple[str, float]] = []
    for w in (p, p, 1.0 - 4.0 * p, p, p):
        for parity, frac in ((EVEN, w / 2), (ODD, w), (EVEN, w / 2)):
            if seq and seq[-1][0] == parity:
                seq[-1] = (parity, seq[-1][1] + frac)
            else:
                seq.append((parity, frac))
    return seq


@dataclass(frozen=True)
class TwoSiteGate:
    parity: str
    fraction: float
    delta: float
    matrix: np.ndarray  # (d*d, d*d), row index = (out_left, out_right)

    def as_tensor(self) -> np.ndarray:
        d = int(round(np.sqrt(self.matrix.shape[0])))
        return self.matrix.reshape(d, d, d, d)


def build_trotter_gates(params: ModelParams, delta: float, schedule=None) -> list[TwoSiteGate]:
    """Gates ``exp(-i h f delta)`` for every entry of the Trotter schedule."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    h = build_two_site_hamiltonian(params)
    w, v = np.linalg.eigh(h)
    sched = suzuki4_schedule() if schedule is None else schedule
    gates = []
    for parity, frac in sched:
        u = (v * np.exp(-1j * frac * delta * w)) @ v.conj().T
        gates.append(TwoSiteGate(parity, frac, delta, u))
    return gates


def compose_schedule(parts: dict, delta: float, schedule=None) -> np.ndarray:
    """Full-space product formula for ``exp(-i (H_even + H_odd) delta)``.

    `parts` maps each parity to a Hermitian matrix on the same space. The
    first schedule entry acts first.
    """
    sched = suzuki4_schedule() if schedule is None else schedule
    dim = next(iter(parts.values())).shape[0]
    out = np.eye(dim, dtype=complex)
    for parity, frac in sched:
        out = exp_hermitian(parts[parity], frac * delta) @ out
    return out
