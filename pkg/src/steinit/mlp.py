"""Minimal deterministic MLP engine: forward/backward passes, Adam, training loop."""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .activations import get_activation
from .exceptions import NonFiniteGradientError
from .metrics import auc, rmse
from .network import NetworkParams

__all__ = [
    "Forward",
    "TrainConfig",
    "EpochRecord",
    "TrainedModel",
    "AdamState",
    "forward",
    "predict",
    "loss",
    "task_loss",
    "backward",
    "adam_step",
    "default_batch_size",
    "train",
    "evaluate",
    "rmse",
    "auc",
]

CLIP_EPS = 1e-12


class Forward(NamedTuple):
    pre: list    # a_1 .. a_L
    post: list   # h_0 (= X) .. h_L
    out_pre: np.ndarray
    y_hat: np.ndarray


def forward(params, X, arch):
    """Propagate ``X`` (n x d) through the network.

    ``a_l = h_{l-1} W_l + b_l``, ``h_l = f(a_l)``, ``y_hat = g(h_L W_o + b_o)``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.weights[0].shape[0]:
        raise ValueError(f"input shape {X.shape} does not match first layer "
                         f"{params.weights[0].shape}")
    f_h = get_activation(arch.hidden_activation).fn
    f_o = get_activation(arch.output_activation).fn
    h = X
    pre, post = [], [X]
    for W, b in params.hidden:
        a = h @ W + b
        h = f_h(a)
        pre.append(a)
        post.append(h)
    z = (h @ params.W_out + params.b_out)[:, 0]
    return Forward(pre, post, z, f_o(z))


def predict(params, X, arch):
    return forward(params, X, arch).y_hat


def loss(y_hat, y, task):
    """Mean squared error (regression) or mean cross-entropy (classification)."""
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if y_hat.shape != y.shape:
        raise ValueError(f"length mismatch: {y_hat.shape} vs {y.shape}")
    if task == "regression":
        return float(np.mean((y - y_hat) ** 2))
    p = np.clip(y_hat, CLIP_EPS, 1.0 - CLIP_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def task_loss(params, X, y, arch, task):
    return loss(predict(params, X, arch), y, task)


def backward(params, X, y, arch, task, fwd=None):
    """Exact gradients of the batch loss, as a :class:`NetworkParams`."""
    y = np.asarray(y, dtype=np.float64).ravel()
    if fwd is None:
        fwd = forward(params, X, arch)
    n = y.shape[0]
    if fwd.y_hat.shape[0] != n:
        raise ValueError("X and y have different numbers of rows")
    out_act = get_activation(arch.output_activation)
    hid_act = get_activation(arch.hidden_activation)

    y_hat = fwd.y_hat
    if task == "regression":
        dy = 2.0 * (y_hat - y) / n
        delta = dy * out_act.deriv_from_output(y_hat)
    elif out_act.name == "sigmoid":
        # canonical link: d CE / d z = y_hat - y
        delta = (y_hat - y) / n
    else:
        p = np.clip(y_hat, CLIP_EPS, 1.0 - CLIP_EPS)
        dy = (p - y) / (p * (1.0 - p)) / n
        delta = dy * out_act.deriv_from_output(y_hat)
    delta = delta[:, None]

    grads_w = [None] * params.n_layers
    grads_b = [None] * params.n_layers
    for layer in range(params.n_layers - 1, -1, -1):
        h_in = fwd.post[layer]
        grads_w[layer] = h_in.T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer].T) * hid_act.deriv_from_output(h_in)
    return NetworkParams(grads_w, grads_b)


@dataclass
class TrainConfig:
    max_epochs: int = 200
    batch_size: Optional[int] = None  # None: min(500, 20% of the training rows)
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    snapshot_on: str = "validation-loss"

    def __post_init__(self):
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.snapshot_on not in ("validation-loss", "validation-metric"):
            raise ValueError(f"unknown snapshot rule {self.snapshot_on!r}")

    def to_dict(self):
        return dict(self.__dict__)


def default_batch_size(n_train, cap=500, fraction=0.2):
    return max(1, min(cap, int(math.floor(fraction * n_train))))


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(a) for a in params.arrays()],
                   [np.zeros_like(a) for a in params.arrays()], 0)


def _layer_name(idx, n_layers):
    layer = idx // 2
    kind = "W" if idx % 2 == 0 else "b"
    return f"{kind}_out" if layer == n_layers - 1 else f"{kind}_{layer + 1}"


def adam_step(params, grads, state, config):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    g_arrays = grads.arrays()
    for i, g in enumerate(g_arrays):
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(_layer_name(i, params.n_layers))
    b1, b2, eps, lr = (config.adam_beta1, config.adam_beta2, config.adam_epsilon,
                       config.learning_rate)
    t = state.t + 1
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), g_arrays, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        new_m.append(m)
        new_v.append(v)
    return NetworkParams.from_arrays(new_p, params.meta), AdamState(new_m, new_v, t)


class EpochRecord(NamedTuple):
    epoch: int
    train_loss: float
    val_loss: float
    val_metric: float


@dataclass
class TrainedModel:
    best_params: NetworkParams
    final_params: NetworkParams
    trajectory: list = field(default_factory=list)
    best_epoch: int = 0
    divergent: bool = False
    batch_size: int = 0
    initial_train_loss: float = float("nan")
    initial_val_loss: float = float("nan")

    @property
    def train_losses(self):
        return np.array([r.train_loss for r in self.trajectory])

    @property
    def val_losses(self):
        return np.array([r.val_loss for r in self.trajectory])


def evaluate(params, X, y, arch, task):
    """``(loss, metric)``: metric is RMSE for regression and AUC for classification."""
    y_hat = predict(params, X, arch)
    value = loss(y_hat, y, task)
    if task == "regression":
        return value, rmse(y_hat, y)
    try:
        return value, auc(y_hat, y)
    except ValueError:
        return value, float("nan")


def train(init_params, X_train, y_train, X_val, y_val, arch, config, task):
    """Mini-batch Adam training with validation snapshotting.

    Each epoch shuffles the training rows with a generator seeded by
    ``(config.seed, epoch)``; the final partial batch is kept. The returned
    ``best_params`` is the snapshot with the best validation loss (or metric,
    per ``config.snapshot_on``).
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    n = X_train.shape[0]
    batch = config.batch_size if config.batch_size is not None else default_batch_size(n)
    if batch > n:
        raise ValueError(f"batch_size {batch} exceeds training size {n}")

    params = init_params.copy()
    init_loss = task_loss(params, X_train, y_train, arch, task)
    init_val_loss = task_loss(params, X_val, y_val, arch, task)
    model = TrainedModel(best_params=init_params.copy(), final_params=params,
                         batch_size=batch, initial_train_loss=init_loss,
                         initial_val_loss=init_val_loss)
    state = AdamState.zeros_like(params)
    higher_better = task == "binary-classification"
    best_key = None

    for epoch in range(1, config.max_epochs + 1):
        order = np.random.default_rng((config.seed, epoch)).permutation(n)
        batch_losses = []
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            Xb, yb = X_train[idx], y_train[idx]
            fwd = forward(params, Xb, arch)
            batch_loss = loss(fwd.y_hat, yb, task)
            if not np.isfinite(batch_loss):
                model.divergent = True
                break
            batch_losses.append(batch_loss)
            grads = backward(params, Xb, yb, arch, task, fwd)
            try:
                params, state = adam_step(params, grads, state, config)
            except NonFiniteGradientError:
                model.divergent = True
                break
        if model.divergent:
            break

        val_loss, val_metric = evaluate(params, X_val, y_val, arch, task)
        if not np.isfinite(val_loss):
            model.divergent = True
            break
        model.trajectory.append(
            EpochRecord(epoch, float(np.mean(batch_losses)), val_loss, val_metric))
        if config.snapshot_on == "validation-loss":
            key = val_loss
        else:
            key = -val_metric if higher_better else val_metric
        if best_key is None or key < best_key:
            best_key = key
            model.best_params = params.copy()
            model.best_epoch = epoch

    model.final_params = params
    return model
