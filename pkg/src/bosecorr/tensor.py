"""Dense complex tensor helpers: pairwise contraction and truncated SVD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class ShapeError(ValueError):
    """Contracted axes have mismatched extents."""


class NumericError(ArithmeticError):
    """Non-finite values reached a numerical kernel."""


def as_tensor(data) -> np.ndarray:
    """Return `data` as a C-contiguous complex128 array, rejecting NaN/Inf."""
    arr = np.ascontiguousarray(data, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise NumericError("tensor contains non-finite entries")
    return arr


def contract(a, b, axes) -> np.ndarray:
    """Contract `a` and `b` over matched index pairs.

    Parameters
    ----------
    a, b : array_like
    axes : pair ``(i, j)`` or sequence of pairs ``[(i0, j0), (i1, j1), ...]``
        Axis ``i`` of `a` is summed against axis ``j`` of `b`.

    Returns
    -------
    ndarray
        Uncontracted axes of `a` followed by those of `b`.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    pairs = [tuple(axes)] if np.ndim(axes[0]) == 0 else [tuple(p) for p in axes]
    ax_a = [i for i, _ in pairs]
    ax_b = [j for _, j in pairs]
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise ShapeError(
                f"axis {i} of a has extent {a.shape[i]} but axis {j} of b has {b.shape[j]}"
            )
    return np.tensordot(a, b, axes=(ax_a, ax_b))


@dataclass(frozen=True)
class SVDResult:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray  # rows are right singular vectors, i.e. m ~ U @ diag(S) @ V
    discarded_weight: float

    def __iter__(self):
        return iter((self.U, self.S, self.V, self.discarded_weight))


def keep_count(s: np.ndarray, eps: float, chi_max: int) -> tuple[int, float]:
    """Number of leading values to keep from a non-increasing spectrum `s`.

    Keeps the fewest values whose discarded tail satisfies
    ``sum(tail**2) / sum(s**2) < eps``, never more than `chi_max` and never
    fewer than one. Returns ``(count, relative discarded weight)``.
    """
    w = np.asarray(s, dtype=float) ** 2
    total = w.sum()
    if total == 0.0:
        return 1, 0.0
    # tail[k] = relative weight of s[k:]; summed from the small end
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]]) / total
    ok = np.nonzero(tail[1:] < eps)[0]
    k = int(ok[0]) + 1 if ok.size else len(w)
    k = max(1, min(k, int(chi_max)))
    return k, float(tail[k])


def truncated_svd(m, eps: float = 0.0, chi_max: int | None = None) -> SVDResult:
    """SVD of a matrix truncated by relative discarded weight and a hard cap.

    Parameters
    ----------
    m : (M, N) array_like
    eps : float
        Relative discarded-weight cutoff, ``0 <= eps < 1``. ``eps = 0`` keeps
        the full spectrum (up to `chi_max`).
    chi_max : int, optional
        Maximum number of kept singular values; defaults to ``min(M, N)``.

    Returns
    -------
    SVDResult
        ``U`` (M, k), ``S`` (k,) un-normalized, ``V`` (k, N) and the relative
        discarded weight.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix contains non-finite entries")
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    if chi_max is None:
        chi_max = min(m.shape)
    if chi_max < 1:
        raise ValueError("chi_max must be >= 1")
    try:
        u, s, v = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        u, s, v = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    k, discarded = keep_count(s, eps, chi_max)
    return SVDResult(u[:, :k], s[:k], v[:k, :], discarded)
