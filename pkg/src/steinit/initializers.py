"""Network initializers: Stein second-order hidden layers with GLM output, and baselines.

Hidden layers under the Stein scheme are the top eigenvectors (by absolute
eigenvalue) of the empirical cross moment ``mean_i y_i (h_i h_i' - I)``,
scaled by ``alpha`` and paired with biases that center every pre-activation
on the data. Layers are initialized in order, feeding each one the
activations of the previous.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .activations import Activation, get_activation
from .exceptions import (
    DegeneratePropagationError,
    DegenerateSignalError,
    NoDirectionError,
    RankDeficientError,
    WidthExceedsRankError,
)
from .glm import DEFAULT_LAMBDA_GRID, grid_search
from .linalg import qr_orthonormal, sym_eig
from .network import NetworkParams

__all__ = [
    "HIDDEN_SCHEMES",
    "OUTPUT_SCHEMES",
    "InitScheme",
    "SteinDecomposition",
    "score2_cross_moment",
    "stein_decomposition",
    "stein_layer_init",
    "scaling_factor",
    "stein_glm_init",
    "first_order_index",
    "truncated_normal",
    "glorot_normal",
    "he_normal",
    "orthogonal_init",
    "init_network",
]

HIDDEN_SCHEMES = ("stein", "glorot-normal", "he-normal", "orthogonal")
OUTPUT_SCHEMES = ("glm", "same-as-hidden")
SIGNAL_EPS = 1e-12
COLLAPSE_STD = 1e-8
# std-dev of a standard normal truncated to [-2, 2]
TRUNC_STD = 0.87962566103423978

_LABELS = {
    "stein": "Stein",
    "glorot-normal": "GlorotNormal",
    "he-normal": "HeNormal",
    "orthogonal": "Orthogonal",
}


@dataclass(frozen=True)
class InitScheme:
    hidden: str = "stein"
    output: str = "glm"
    alpha: object = "auto"
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    fill: bool = False
    restandardize: bool = False

    def __post_init__(self):
        if self.hidden not in HIDDEN_SCHEMES:
            raise ValueError(f"unknown hidden scheme {self.hidden!r}")
        if self.output not in OUTPUT_SCHEMES:
            raise ValueError(f"unknown output scheme {self.output!r}")
        if self.alpha != "auto" and not float(self.alpha) > 0:
            raise ValueError("alpha must be positive or 'auto'")
        object.__setattr__(self, "lambda_grid", tuple(float(x) for x in self.lambda_grid))
        if self.output == "glm" and not self.lambda_grid:
            raise ValueError("lambda_grid must be non-empty when output='glm'")
        if any(lam <= 0 for lam in self.lambda_grid):
            raise ValueError("lambda_grid entries must be positive")

    @property
    def label(self):
        base = _LABELS[self.hidden]
        if self.hidden == "stein":
            return "SteinGLM" if self.output == "glm" else "Stein"
        return base + "+GLM" if self.output == "glm" else base

    @classmethod
    def parse(cls, text):
        """Build a scheme from a label such as ``SteinGLM``, ``he-normal`` or ``orthogonal+glm``."""
        key = text.strip().lower().replace("_", "-")
        presets = {
            "steinglm": ("stein", "glm"),
            "stein": ("stein", "same-as-hidden"),
            "glorotnormal": ("glorot-normal", "same-as-hidden"),
            "henormal": ("he-normal", "same-as-hidden"),
        }
        if key in presets:
            hidden, output = presets[key]
            return cls(hidden, output)
        output = "same-as-hidden"
        if key.endswith("+glm"):
            key, output = key[:-4], "glm"
        key = {"glorotnormal": "glorot-normal", "henormal": "he-normal",
               "glorot": "glorot-normal", "he": "he-normal"}.get(key, key)
        return cls(key, output)

    def to_dict(self):
        return {
            "hidden": self.hidden,
            "output": self.output,
            "alpha": self.alpha,
            "lambda_grid": list(self.lambda_grid),
            "fill": self.fill,
            "restandardize": self.restandardize,
        }


class SteinDecomposition(NamedTuple):
    sigma_hat: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def score2_cross_moment(H, y):
    """Empirical ``mean_i y_i (h_i h_i' - I)`` for an n x m matrix ``H``."""
    H = np.asarray(H, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if H.ndim != 2:
        raise ValueError("H must be 2-D")
    n, m = H.shape
    if n == 0:
        raise ValueError("need at least one row")
    if y.shape[0] != n:
        raise ValueError(f"H has {n} rows but y has {y.shape[0]} entries")
    sigma = (H * y[:, None]).T @ H / n - y.mean() * np.eye(m)
    return 0.5 * (sigma + sigma.T)


def stein_decomposition(H, y):
    sigma = score2_cross_moment(H, y)
    evals, evecs = sym_eig(sigma)
    return SteinDecomposition(sigma, evals, evecs)


def _random_orthonormal_blocks(m, k, rng):
    """``k`` unit columns in dimension ``m``, orthonormal within blocks of ``m``."""
    blocks = []
    while k > 0:
        step = min(k, m)
        blocks.append(orthogonal_init(m, step, rng))
        k -= step
    return np.hstack(blocks)


def stein_layer_init(H, y, width, alpha=1.0, fill=False, rng=None):
    """Weights and biases of one layer from the second-order cross moment.

    Parameters
    ----------
    H : ndarray, shape (n, m)
        Inputs to the layer.
    y : ndarray, shape (n,)
    width : int
        Number of neurons ``k``.
    alpha : float
        Scale applied to the unit eigenvectors.
    fill : bool
        When ``width > m``, keep all ``m`` eigenvectors and append random
        unit columns (orthonormal in blocks of ``m``) instead of raising.
        ``W'W = alpha**2 I`` then no longer holds.
    rng : numpy.random.Generator, optional
        Only used in fill mode.

    Returns
    -------
    W : ndarray, shape (m, k)
        ``alpha`` times the top-k eigenvectors, so ``W'W = alpha**2 I``.
    b : ndarray, shape (k,)
        ``-mean_i W' h_i``, which centers the pre-activations.
    """
    H = np.asarray(H, dtype=np.float64)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    m = H.shape[1]
    dec = stein_decomposition(H, y)
    if np.all(np.abs(dec.eigenvalues) < SIGNAL_EPS):
        raise DegenerateSignalError(
            "cross-moment matrix has no eigenvalue above 1e-12 in magnitude")
    if width <= m:
        B = dec.eigenvectors[:, :width]
    elif fill:
        rng = rng if rng is not None else np.random.default_rng(0)
        extra = _random_orthonormal_blocks(m, width - m, rng)
        B = np.hstack([dec.eigenvectors, extra])
    else:
        raise WidthExceedsRankError(
            f"layer width {width} exceeds the {m} available eigenvectors")
    W = alpha * B
    b = -(H @ W).mean(axis=0)
    return W, b


def scaling_factor(activation):
    """Weight scale that undoes the activation's slope at zero: ``1 / f'(0)``.

    Gives 1 for tanh and 4 for sigmoid. Custom :class:`Activation` objects are
    accepted; named activations other than tanh and sigmoid are rejected.
    """
    if isinstance(activation, Activation):
        act = activation
    else:
        if activation not in ("tanh", "sigmoid"):
            raise ValueError(f"no scaling factor for activation {activation!r}")
        act = get_activation(activation)
    if not act.slope_at_zero > 0:
        raise ValueError(f"activation {act.name!r} has no positive slope at 0")
    return 1.0 / act.slope_at_zero


def _resolve_alpha(scheme, arch):
    if scheme.alpha == "auto":
        return scaling_factor(arch.hidden_activation)
    return float(scheme.alpha)


def _check_propagation(h, layer):
    if h.shape[0] > 1 and np.all(h.std(axis=0) < COLLAPSE_STD):
        raise DegeneratePropagationError(layer)


def _stein_hidden(X, y, arch, scheme, rng):
    """Initialize the hidden layers in order; returns ``(weights, biases, h_L)``."""
    f = get_activation(arch.hidden_activation).fn
    alpha = _resolve_alpha(scheme, arch)
    weights, biases = [], []
    h = np.asarray(X, dtype=np.float64)
    for layer, width in enumerate(arch.hidden_widths, start=1):
        if scheme.restandardize:
            mu, sd = h.mean(axis=0), h.std(axis=0)
            sd = np.where(sd > 0, sd, 1.0)
            W, b = stein_layer_init((h - mu) / sd, y, width, alpha, scheme.fill, rng)
            W = W / sd[:, None]
            b = b - mu @ W
        else:
            W, b = stein_layer_init(h, y, width, alpha, scheme.fill, rng)
        weights.append(W)
        biases.append(b)
        h = f(h @ W + b)
        _check_propagation(h, layer)
    return weights, biases, h


def _propagate(X, weights, biases, arch):
    f = get_activation(arch.hidden_activation).fn
    h = np.asarray(X, dtype=np.float64)
    for W, b in zip(weights, biases):
        h = f(h @ W + b)
    return h


def _task_for(arch):
    return "binary-classification" if arch.output_activation == "sigmoid" else "regression"


def _glm_output(H_tr, y, H_val, y_val, scheme, task):
    if H_val is None:
        H_val, y_val = H_tr, y
    fit = grid_search(H_tr, y, H_val, y_val, scheme.lambda_grid, task)
    return fit.weights[:, None], np.array([fit.intercept]), fit.lam


def stein_glm_init(X, y, arch, scheme=None, X_val=None, y_val=None, rng=None):
    """Stein hidden layers followed by a GLM output layer.

    The GLM penalty is chosen on ``(X_val, y_val)`` (propagated through the
    freshly initialized hidden layers); without validation data it is
    chosen on the training rows.
    """
    scheme = scheme or InitScheme("stein", "glm")
    if scheme.hidden != "stein" or scheme.output != "glm":
        scheme = InitScheme("stein", "glm", scheme.alpha, scheme.lambda_grid,
                            scheme.fill, scheme.restandardize)
    return init_network(arch, scheme, X, y, X_val, y_val, rng)


def first_order_index(X, y):
    """Unit-norm estimate of a single projection index from ``mean_i y_i x_i``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] < 2:
        raise ValueError("need at least two rows")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y have different numbers of rows")
    v = (X * y[:, None]).mean(axis=0)
    norm = np.linalg.norm(v)
    if norm < SIGNAL_EPS:
        raise NoDirectionError("first-order moment is numerically zero")
    return v / norm


def truncated_normal(shape, stddev, rng):
    """Normal draws truncated to two standard deviations, rescaled to ``stddev``.

    Values outside ``[-2, 2]`` are redrawn; the result is divided by the
    std-dev of the truncated distribution so the target variance is met.
    """
    z = rng.standard_normal(shape)
    bad = np.abs(z) > 2.0
    while np.any(bad):
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > 2.0
    return z * (stddev / TRUNC_STD)


def glorot_normal(m, k, rng):
    return truncated_normal((m, k), np.sqrt(2.0 / (m + k)), rng)


def he_normal(m, k, rng):
    return truncated_normal((m, k), np.sqrt(2.0 / m), rng)


def orthogonal_init(m, k, rng):
    """Orthonormal columns from the QR factorization of a Gaussian draw."""
    if m < k:
        raise ValueError(f"orthogonal_init needs m >= k, got {m} < {k}")
    while True:
        try:
            return qr_orthonormal(rng.standard_normal((m, k)))
        except RankDeficientError:
            continue


_RANDOM = {
    "glorot-normal": glorot_normal,
    "he-normal": he_normal,
    "orthogonal": orthogonal_init,
}


def init_network(arch, scheme, X, y, X_val=None, y_val=None, rng=None):
    """Initialize every layer of ``arch`` under ``scheme``.

    Random hidden schemes draw from ``rng`` with zero biases. With
    ``scheme.output == "glm"`` the output layer is a GLM fitted on the
    propagated last hidden layer whatever the hidden scheme; otherwise it is
    initialized like the hidden layers (a width-1 Stein layer for ``stein``).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    elif not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    task = _task_for(arch)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[1] != arch.input_dim:
        raise ValueError(f"X has {X.shape[1]} columns, architecture expects {arch.input_dim}")

    if scheme.hidden == "stein":
        weights, biases, h_last = _stein_hidden(X, y, arch, scheme, rng)
    else:
        draw = _RANDOM[scheme.hidden]
        weights, biases = [], []
        for fan_in, fan_out in arch.layer_dims[:-1]:
            weights.append(draw(fan_in, fan_out, rng))
            biases.append(np.zeros(fan_out))
        h_last = _propagate(X, weights, biases, arch)

    meta = {"scheme": scheme.label}
    if scheme.output == "glm":
        h_val = None if X_val is None else _propagate(X_val, weights, biases, arch)
        W_o, b_o, lam = _glm_output(h_last, y, h_val, y_val, scheme, task)
        meta["glm_lambda"] = lam
    elif scheme.hidden == "stein":
        W_o, b_o = stein_layer_init(h_last, y, 1, _resolve_alpha(scheme, arch),
                                    scheme.fill, rng)
    else:
        W_o = _RANDOM[scheme.hidden](arch.hidden_widths[-1], 1, rng)
        b_o = np.zeros(1)
    weights.append(W_o)
    biases.append(b_o)
    return NetworkParams(weights, biases, meta)
