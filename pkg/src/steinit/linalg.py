"""Dense linear-algebra kernels used by the initializers and the GLM fits.

Everything here works on float64 ``numpy`` arrays and is a pure function of
its inputs.
"""

from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import NotPositiveDefiniteError, RankDeficientError

__all__ = [
    "EigenResult",
    "sym_eig",
    "qr_orthonormal",
    "cholesky",
    "solve_spd",
    "matmul",
    "fix_signs",
]


class EigenResult(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _as_finite_matrix(A, name="A"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def fix_signs(V):
    """Flip columns so the entry of largest magnitude in each is non-negative."""
    V = np.array(V, dtype=np.float64, copy=True)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return V * signs


def _round_robin(m):
    """Orderings for one parallel Jacobi sweep over an even number ``m`` of indices.

    Yields ``m - 1`` arrays; in each, positions ``(2i, 2i+1)`` form a pair and
    every pair of indices meets exactly once per sweep.
    """
    players = list(range(m))
    half = m // 2
    for _ in range(m - 1):
        top = players[:half]
        bottom = players[half:][::-1]
        yield np.array([x for pair in zip(top, bottom) for x in pair])
        players = [players[0], players[-1]] + players[1:-1]


def _rotation(work):
    """Cosines and sines of the Jacobi rotations zeroing the (2i, 2i+1) entries of ``work``."""
    app = work.diagonal()[0::2]
    aqq = work.diagonal()[1::2]
    apq = work.diagonal(offset=1)[0::2].copy()
    active = apq != 0.0
    theta = np.zeros_like(apq)
    with np.errstate(over="ignore"):
        theta[active] = (aqq[active] - app[active]) / (2.0 * apq[active])
    big = np.abs(theta) > 1e150
    tb = np.where(big, 0.0, theta)
    t = np.sign(tb + (tb == 0)) / (np.abs(tb) + np.sqrt(tb**2 + 1.0))
    # t ~ 1/(2 theta) once theta**2 would overflow
    t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
    t = np.where(active, t, 0.0)
    c = 1.0 / np.sqrt(t**2 + 1.0)
    return c, t * c, bool(active.any())


def sym_eig(A, tol=1e-12, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are applied in round-robin order so that every round updates
    ``d/2`` disjoint index pairs at once.

    Parameters
    ----------
    A : array_like, shape (d, d)
        Symmetric matrix. It is symmetrized as ``(A + A.T) / 2`` first.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm falls below
        ``tol * ||A||_F``. The matrix is normalized to unit Frobenius norm
        while rotating, so the result does not depend on its scale.
    max_sweeps : int

    Returns
    -------
    EigenResult
        Eigenvalues sorted by descending absolute value (ties keep the
        original diagonal order) and matching orthonormal eigenvectors as
        columns, each signed so its largest-magnitude entry is non-negative.
    """
    A = _as_finite_matrix(A)
    d = A.shape[0]
    if d != A.shape[1]:
        raise ValueError(f"sym_eig needs a square matrix, got shape {A.shape}")
    if d == 0:
        raise ValueError("sym_eig needs d >= 1")

    # odd sizes get a zero padding index, which is never rotated
    m = d + (d % 2)
    work = np.zeros((m, m))
    work[:d, :d] = 0.5 * (A + A.T)
    scale = np.linalg.norm(work)
    if scale == 0.0:
        return EigenResult(np.zeros(d), np.eye(d))
    work /= scale
    V = np.eye(m)
    label = np.arange(m)  # label[k]: original index stored at position k

    for _ in range(max_sweeps):
        if np.linalg.norm(work - np.diag(work.diagonal())) < tol:
            break
        for target in _round_robin(m):
            where = np.empty(m, dtype=int)
            where[label] = np.arange(m)
            pos = where[target]
            work = work[np.ix_(pos, pos)]
            V = V[:, pos]
            label = target

            c, s, active = _rotation(work)
            if not active:
                continue
            # work <- J^T work J; J rotates each (even, odd) column pair
            even = work[:, 0::2].copy()
            odd = work[:, 1::2]
            work[:, 0::2] = c * even - s * odd
            work[:, 1::2] = s * even + c * odd
            even = work[0::2, :].copy()
            odd = work[1::2, :]
            work[0::2, :] = c[:, None] * even - s[:, None] * odd
            work[1::2, :] = s[:, None] * even + c[:, None] * odd
            pairs = np.arange(0, m, 2)
            work[pairs, pairs + 1] = 0.0
            work[pairs + 1, pairs] = 0.0
            even = V[:, 0::2].copy()
            odd = V[:, 1::2]
            V[:, 0::2] = c * even - s * odd
            V[:, 1::2] = s * even + c * odd

    back = np.argsort(label)
    work = work[np.ix_(back, back)]
    V = V[:, back]
    evals = scale * work.diagonal()[:d]
    evecs = V[:d, :d]
    order = np.argsort(-np.abs(evals), kind="stable")
    return EigenResult(evals[order], fix_signs(evecs[:, order]))


def qr_orthonormal(G, rtol=1e-10):
    """Orthonormal basis for the column span of ``G`` (d x k, d >= k).

    Raises :class:`RankDeficientError` when ``G`` is numerically rank deficient.
    Columns follow the same sign convention as :func:`sym_eig`.
    """
    G = _as_finite_matrix(G, "G")
    d, k = G.shape
    if d < k:
        raise ValueError(f"qr_orthonormal needs rows >= cols, got {G.shape}")
    Q, R = np.linalg.qr(G, mode="reduced")
    diag = np.abs(np.diag(R))
    if k and diag.min() <= rtol * max(diag.max(), np.finfo(float).tiny):
        raise RankDeficientError("input matrix is rank deficient")
    return fix_signs(Q)


def cholesky(A):
    """Lower Cholesky factor; reports the first non-positive pivot on failure."""
    A = _as_finite_matrix(A)
    d = A.shape[0]
    if d != A.shape[1]:
        raise ValueError(f"cholesky needs a square matrix, got shape {A.shape}")
    L = np.zeros_like(A)
    for j in range(d):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0.0:
            raise NotPositiveDefiniteError(pivot, j)
        L[j, j] = np.sqrt(pivot)
        L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_spd(A, b):
    """Solve ``A x = b`` for symmetric positive-definite ``A``."""
    A = _as_finite_matrix(A)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"shape mismatch: A is {A.shape}, b is {b.shape}")
    L = cholesky(0.5 * (A + A.T))
    z = solve_triangular(L, b, lower=True)
    return solve_triangular(L.T, z, lower=False)


def matmul(A, B):
    A = _as_finite_matrix(A)
    B = _as_finite_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"inner dimensions differ: {A.shape} @ {B.shape}")
    return A @ B
