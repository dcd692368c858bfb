"""Exact state-vector evolution of short open Bose-Hubbard chains.

Serves as a brute-force reference for the infinite-chain engine at short
times, before boundary effects reach the compared sites.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .table import CorrelationTable

MAX_STATES = 5_000_000
#: Below this dimension evolution uses a dense eigendecomposition.
DENSE_LIMIT = 3000
KRYLOV_DIM = 30
KRYLOV_TOL = 1e-12
LIGHT_CONE_V = 6.0


class CapacityError(MemoryError):
    pass


class KrylovError(ArithmeticError):
    pass


def _count_states(L, N, n_max):
    # number of compositions of N into L parts each <= n_max
    ways = np.zeros(N + 1, dtype=object)
    ways[0] = 1
    for _ in range(L):
        nxt = np.zeros_like(ways)
        for k in range(N + 1):
            nxt[k] = sum(ways[k - j] for j in range(min(k, n_max) + 1))
        ways = nxt
    return int(ways[N])


class FockBasis:
    """Occupation vectors of `L` sites holding `N` bosons, at most `n_max` each.

    States are ordered lexicographically (ascending); each is keyed by its
    base-``(n_max+1)`` code so lookups are a binary search.
    """

    def __init__(self, L: int, N: int, n_max: int, max_states: int = MAX_STATES):
        if L < 1 or N < 0 or n_max < 1:
            raise ValueError("need L >= 1, N >= 0, n_max >= 1")
        count = _count_states(L, N, n_max)
        if count > max_states:
            raise CapacityError(f"{count} basis states exceed the limit {max_states}")
        if count == 0:
            raise ValueError(f"no states with N={N} on L={L} sites at n_max={n_max}")
        self.L, self.N, self.n_max = L, N, n_max
        # grow prefixes site by site, pruning those that cannot reach N
        prefix = np.zeros((1, 0), dtype=np.int8)
        used = np.zeros(1, dtype=np.int64)
        for site in range(L):
            left = L - site - 1
            blocks = []
            for n in range(n_max + 1):
                tot = used + n
                ok = (tot <= N) & (tot + left * n_max >= N)
                if ok.any():
                    blocks.append((np.column_stack([prefix[ok], np.full(ok.sum(), n, np.int8)]), tot[ok]))
            prefix = np.concatenate([b[0] for b in blocks])
            used = np.concatenate([b[1] for b in blocks])
        self.radix = n_max + 1
        self.weights = self.radix ** np.arange(L - 1, -1, -1, dtype=np.int64)
        codes = prefix.astype(np.int64) @ self.weights
        order = np.argsort(codes, kind="stable")
        self.states = prefix[order]
        self.codes = codes[order]

    @property
    def dim(self) -> int:
        return len(self.codes)

    def index(self, occupations) -> np.ndarray:
        """Basis indices of the given occupation rows (KeyError if absent)."""
        occ = np.atleast_2d(np.asarray(occupations, dtype=np.int64))
        codes = occ @ self.weights
        idx = np.searchsorted(self.codes, codes)
        idx_c = np.minimum(idx, self.dim - 1)
        if np.any(self.codes[idx_c] != codes):
            raise KeyError("occupation vector not in basis")
        return idx_c

    def unit_filling_index(self) -> int:
        return int(self.index(np.ones(self.L, dtype=int))[0])


def build_hamiltonian(basis: FockBasis, gamma: float, J: float = 1.0) -> sp.csr_matrix:
    """Open-chain ``H = -J sum_j (b+_j b_j+1 + h.c.) + U/2 sum_j n_j(n_j-1)``, ``U = 1/gamma``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    U = 1.0 / gamma
    s = basis.states.astype(np.int64)
    rows, cols, vals = [], [], []
    for j in range(basis.L - 1):
        # b+_j b_{j+1}: needs n_{j+1} >= 1 and n_j < n_max
        src = np.flatnonzero((s[:, j + 1] >= 1) & (s[:, j] < basis.n_max))
        if src.size == 0:
            continue
        amp = -J * np.sqrt((s[src, j] + 1) * s[src, j + 1])
        tgt_codes = basis.codes[src] + basis.weights[j] - basis.weights[j + 1]
        tgt = np.searchsorted(basis.codes, tgt_codes)
        rows += [tgt, src]
        cols += [src, tgt]
        vals += [amp, amp]
    diag = 0.5 * U * (s * (s - 1)).sum(axis=1)
    rows.append(np.arange(basis.dim))
    cols.append(np.arange(basis.dim))
    vals.append(diag.astype(float))
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(basis.dim, basis.dim)
    )
    return H.tocsr()


def _krylov_step(H, v, dt, m, tol):
    """One Lanczos step ``exp(-i H dt) v``; returns (w, error_estimate)."""
    n = v.size
    beta0 = np.linalg.norm(v)
    V = np.zeros((m + 1, n), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[0] = v / beta0
    k = m
    for j in range(m):
        w = H @ V[j]
        alpha[j] = np.vdot(V[j], w).real
        w -= alpha[j] * V[j]
        if j:
            w -= beta[j - 1] * V[j - 1]
        # full reorthogonalization keeps the basis orthonormal to rounding
        w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-14 * max(1.0, abs(alpha[j])):
            k = j + 1
            break
        V[j + 1] = w / beta[j]
    T = np.diag(alpha[:k]) + np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
    ev, U = np.linalg.eigh(T)
    c = U @ (np.exp(-1j * dt * ev) * U[0].conj())
    err = 0.0 if k < m else abs(beta[m - 1] * c[-1]) * beta0
    return beta0 * (c @ V[:k]), err


def krylov_propagate(H, v, t, m: int = KRYLOV_DIM, tol: float = KRYLOV_TOL, dt0: float | None = None):
    """``exp(-i H t) v`` by adaptive Lanczos steps with local error below `tol`."""
    if t == 0:
        return v.copy()
    if dt0 is None:
        # crude norm bound sets the first step
        hn = abs(H).sum(axis=1).max() if sp.issparse(H) else np.abs(H).sum(axis=1).max()
        dt0 = min(t, 10.0 / max(hn, 1e-300))
    done, dt = 0.0, dt0
    w = v.copy()
    tries = 0
    while done < t * (1 - 1e-15):
        step = min(dt, t - done)
        out, err = _krylov_step(H, w, step, m, tol)
        if err <= tol:
            w = out
            done += step
            tries = 0
            if err < tol / 100:
                dt = step * 1.5
        else:
            dt = step / 2
            tries += 1
            if tries > 60:
                raise KrylovError(f"Lanczos step failed to converge at t={done:g}")
    return w


def evolve_exact(basis: FockBasis, H, tau_grid, psi0=None, method: str = "auto") -> np.ndarray:
    """States ``exp(-i H tau) psi0`` on `tau_grid`; shape ``(len(tau_grid), dim)``.

    `psi0` defaults to the unit-filling Fock state. `method` is ``"dense"``,
    ``"krylov"`` or ``"auto"`` (dense below `DENSE_LIMIT` states).
    """
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(taus) < 0) or (taus.size and taus[0] < 0):
        raise ValueError("tau grid must be non-negative and non-decreasing")
    if psi0 is None:
        psi0 = np.zeros(basis.dim, dtype=complex)
        psi0[basis.unit_filling_index()] = 1.0
    psi0 = np.asarray(psi0, dtype=complex)
    if method == "auto":
        method = "dense" if basis.dim <= DENSE_LIMIT else "krylov"
    out = np.empty((taus.size, basis.dim), dtype=complex)
    if method == "dense":
        Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
        ev, U = scipy.linalg.eigh(Hd)
        c = U.conj().T @ psi0
        for k, t in enumerate(taus):
            out[k] = psi0 if t == 0 else U @ (np.exp(-1j * t * ev) * c)
        return out
    if method != "krylov":
        raise ValueError(f"unknown method {method!r}")
    psi, t_prev = psi0.copy(), 0.0
    for k, t in enumerate(taus):
        psi = krylov_propagate(H, psi, t - t_prev)
        out[k] = psi
        t_prev = t
    return out


def density_correlator(basis: FockBasis, psi: np.ndarray, i: int, j: int) -> float:
    """Connected ``<n_i n_j> - <n_i><n_j>`` in state `psi`."""
    p = np.abs(psi) ** 2
    ni = basis.states[:, i].astype(float)
    nj = basis.states[:, j].astype(float)
    return float(p @ (ni * nj) - (p @ ni) * (p @ nj))


def admissible_pairs(L: int, d: int, tau: float, v: float = LIGHT_CONE_V):
    """Pairs ``(k, k+d)`` whose sites are more than ``v tau`` bonds from both edges."""
    lim = v * tau
    return [(k, k + d) for k in range(L - d) if min(k, L - 1 - k) > lim and min(k + d, L - 1 - k - d) > lim]


def reference_correlations(basis: FockBasis, snapshots, tau_grid, distances):
    """Average ``|C_{k,k+d}|`` over light-cone-isolated pairs.

    Returns
    -------
    G : ndarray, shape (len(tau_grid), len(distances))
        NaN where no admissible pair exists.
    excluded : list of (tau, d)
    """
    taus = np.asarray(tau_grid, dtype=float)
    G = np.full((taus.size, len(distances)), np.nan)
    excluded = []
    n = basis.states.astype(float)
    for a, (t, psi) in enumerate(zip(taus, snapshots)):
        p = np.abs(psi) ** 2
        mean = p @ n
        for b, d in enumerate(distances):
            pairs = admissible_pairs(basis.L, d, t)
            if not pairs:
                excluded.append((float(t), int(d)))
                continue
            vals = [abs(p @ (n[:, i] * n[:, j]) - mean[i] * mean[j]) for i, j in pairs]
            G[a, b] = float(np.mean(vals))
    return G, excluded


def ed_table(L: int, gamma: float, tau_grid, d_max: int, n_max: int | None = None) -> CorrelationTable:
    """Reference `CorrelationTable` (``source=ed``) for the unit-filling quench.

    Entries without an admissible pair are stored as zero and listed in
    ``meta["excluded"]``.
    """
    n_max = L if n_max is None else n_max
    basis = FockBasis(L, L, n_max)
    H = build_hamiltonian(basis, gamma)
    snaps = evolve_exact(basis, H, tau_grid)
    G, excl = reference_correlations(basis, snaps, tau_grid, list(range(1, d_max + 1)))
    meta = {"source": "ed", "L": L, "gamma": gamma, "n_max": n_max, "excluded": excl}
    return CorrelationTable(np.asarray(tau_grid, float), np.nan_to_num(G, nan=0.0), meta)


def basis_size(L: int, N: int, n_max: int) -> int:
    return _count_states(L, N, n_max)


def energy(H, psi) -> float:
    return float(np.vdot(psi, H @ psi).real)


def norm_error(snapshots) -> float:
    return float(np.max(np.abs(np.linalg.norm(snapshots, axis=1) - 1.0)))

