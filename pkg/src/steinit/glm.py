"""Output-layer GLM fits: ridge regression and l2-penalized logistic regression.

Both objectives penalize the weights as ``lam * ||w||**2`` and leave the
intercept unpenalized.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import NotPositiveDefiniteError
from .linalg import solve_spd
from .metrics import auc, rmse

__all__ = [
    "GlmFit",
    "fit_ridge",
    "fit_logistic",
    "grid_search",
    "ridge_objective",
    "logistic_objective",
    "logistic_gradient",
    "DEFAULT_LAMBDA_GRID",
]

DEFAULT_LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


@dataclass
class GlmFit:
    weights: np.ndarray
    intercept: float
    lam: float
    task: str
    converged: bool = True
    iterations: int = 0

    def decision(self, H):
        return np.asarray(H) @ self.weights + self.intercept

    def predict(self, H):
        z = self.decision(H)
        return expit(z) if self.task == "binary-classification" else z


def _check(H, y):
    H = np.asarray(H, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if H.ndim != 2 or y.ndim != 1 or H.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: H {H.shape}, y {y.shape}")
    if H.shape[0] < 1:
        raise ValueError("need at least one row")
    return H, y


def ridge_objective(H, y, w, b, lam):
    r = y - (H @ w + b)
    return np.mean(r * r) + lam * (w @ w)


def fit_ridge(H, y, lam):
    """Closed-form ridge fit on centered data.

    Solves ``(Hc'Hc/n + lam I) w = Hc'yc/n`` and recovers the intercept from
    the means.
    """
    H, y = _check(H, y)
    if lam < 0:
        raise ValueError("lam must be >= 0")
    n, m = H.shape
    hbar = H.mean(axis=0)
    ybar = y.mean()
    Hc = H - hbar
    A = Hc.T @ Hc / n + lam * np.eye(m)
    rhs = Hc.T @ (y - ybar) / n
    try:
        w = solve_spd(A, rhs)
    except NotPositiveDefiniteError as exc:
        if lam > 0:
            raise
        top = float(np.linalg.eigvalsh(Hc.T @ Hc / n).max(initial=0.0))
        hint = max(1e-8, 1e-8 * top)
        raise np.linalg.LinAlgError(
            f"singular normal equations at lam=0; try lam >= {hint:.1e}"
        ) from exc
    b = ybar - hbar @ w
    return GlmFit(w, float(b), float(lam), "regression", True, 1)


def logistic_objective(H, y, w, b, lam):
    z = H @ w + b
    return np.mean(np.logaddexp(0.0, z) - y * z) + lam * (w @ w)


def logistic_gradient(H, y, w, b, lam):
    """Gradient of :func:`logistic_objective` as ``(grad_w, grad_b)``."""
    r = expit(H @ w + b) - y
    n = H.shape[0]
    return H.T @ r / n + 2.0 * lam * w, r.mean()


def fit_logistic(H, y, lam, tol=1e-8, max_iter=100):
    """Penalized logistic regression by Newton / IRLS with step halving.

    Falls back to a gradient step whenever the Newton system is
    ill-conditioned (condition estimate above 1e12).
    """
    H, y = _check(H, y)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic regression needs y in {0, 1}")
    if not lam > 0:
        raise ValueError("logistic regression needs lam > 0")
    n, m = H.shape
    Ha = np.hstack([H, np.ones((n, 1))])
    penalty = np.full(m + 1, 2.0 * lam)
    penalty[-1] = 0.0

    theta = np.zeros(m + 1)
    p0 = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    theta[-1] = np.log(p0 / (1 - p0))

    def objective(th):
        return logistic_objective(H, y, th[:-1], th[-1], lam)

    def gradient(th):
        gw, gb = logistic_gradient(H, y, th[:-1], th[-1], lam)
        return np.append(gw, gb)

    f = objective(theta)
    iterations = 0
    converged = np.linalg.norm(gradient(theta)) < tol
    while not converged and iterations < max_iter:
        g = gradient(theta)
        p = expit(Ha @ theta)
        hess = (Ha * (p * (1.0 - p))[:, None]).T @ Ha / n + np.diag(penalty)
        step = -g
        if np.linalg.cond(hess) < 1e12:
            try:
                step = -solve_spd(hess, g)
            except NotPositiveDefiniteError:
                pass
        t = 1.0
        cand = theta + step
        fc = objective(cand)
        while fc > f and t > 1e-12:
            t *= 0.5
            cand = theta + t * step
            fc = objective(cand)
        iterations += 1
        if fc > f:
            break
        theta, f = cand, fc
        converged = np.linalg.norm(gradient(theta)) < tol
    if not converged:
        warnings.warn(f"logistic fit did not converge (lam={lam})", stacklevel=2)
    return GlmFit(theta[:-1], float(theta[-1]), float(lam), "binary-classification",
                  bool(converged), iterations)


def _score(fit, H, y):
    if fit.task == "regression":
        return -rmse(fit.predict(H), y)
    return auc(fit.decision(H), y)


def grid_search(H_tr, y_tr, H_val, y_val, grid=DEFAULT_LAMBDA_GRID, task="regression"):
    """Fit one GLM per penalty in ``grid`` and keep the best on validation data.

    Validation RMSE (regression) or AUC (classification) decides; ties go to
    the larger penalty.
    """
    grid = sorted(set(float(g) for g in grid), reverse=True)
    if not grid:
        raise ValueError("grid must be non-empty")
    fitter = fit_ridge if task == "regression" else fit_logistic
    best, best_score = None, -np.inf
    for lam in grid:
        fit = fitter(H_tr, y_tr, lam)
        score = _score(fit, H_val, y_val)
        if score > best_score:
            best, best_score = fit, score
    if best is None:
        # every score was nan; keep the most regularized fit
        best = fitter(H_tr, y_tr, grid[0])
    return best
