"""Planted multi-index data with a known projection basis."""

import numpy as np

from .linalg import qr_orthonormal

__all__ = ["multi_index", "principal_angles"]


def multi_index(n, d, k, seed=0, coefs=None, noise=0.0):
    """Draw ``x ~ N(0, I_d)`` and ``y = sum_j c_j (b_j' x)**2 + noise * eps``.

    The ``b_j`` are the columns of a random ``d x k`` orthonormal ``B``.
    ``coefs`` defaults to ``(k, k-1, ..., 1)``. Returns ``(X, y, B)``.
    """
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    if n < 1:
        raise ValueError("n must be >= 1")
    coefs = np.arange(k, 0, -1, dtype=np.float64) if coefs is None else np.asarray(coefs, float)
    if coefs.shape != (k,):
        raise ValueError(f"need {k} coefficients, got {coefs.shape}")
    rng = np.random.default_rng(seed)
    B = qr_orthonormal(rng.standard_normal((d, k)))
    X = rng.standard_normal((n, d))
    y = ((X @ B) ** 2) @ coefs
    if noise:
        y = y + noise * rng.standard_normal(n)
    return X, y, B


def principal_angles(U, V):
    """Principal angles (radians, ascending) between the column spans of ``U`` and ``V``."""
    Qu, _ = np.linalg.qr(np.asarray(U, dtype=np.float64))
    Qv, _ = np.linalg.qr(np.asarray(V, dtype=np.float64))
    s = np.linalg.svd(Qu.T @ Qv, compute_uv=False)
    return np.sort(np.arccos(np.clip(s, -1.0, 1.0)))
