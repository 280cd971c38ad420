"""Stein initialization for convolutional layers via flattened image patches.

A convolution with ``Q`` filters of size ``l_h x l_w`` over ``T`` channels is a
dense layer acting on every ``T * l_h * l_w`` patch, so each patch is treated
as one sample carrying its image's label and the filter bank is initialized
like a hidden layer of width ``Q``.
"""

from dataclasses import dataclass

import numpy as np

from .activations import get_activation
from .initializers import (
    InitScheme,
    init_network,
    scaling_factor,
    stein_decomposition,
    SIGNAL_EPS,
)
from .exceptions import DegenerateSignalError, WidthExceedsRankError
from .network import Architecture

__all__ = [
    "ConvLayerSpec",
    "MaxPool",
    "output_size",
    "extract_patches",
    "conv_forward",
    "maxpool_forward",
    "stein_conv_init",
    "init_conv_stack",
    "forward_stack",
    "init_cnn",
    "digit_stack",
]


@dataclass(frozen=True)
class ConvLayerSpec:
    filters: int
    filter_h: int = 3
    filter_w: int = 3
    stride: int = 1
    padding: str = "same"

    def __post_init__(self):
        if self.filter_h < 1 or self.filter_w < 1 or self.filters < 1 or self.stride < 1:
            raise ValueError(f"invalid conv spec {self}")
        if self.padding not in ("same", "valid"):
            raise ValueError(f"unknown padding {self.padding!r}")


@dataclass(frozen=True)
class MaxPool:
    window: int = 2


def _check_images(images):
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4:
        raise ValueError(f"images must be (n, T, H, W), got shape {images.shape}")
    if min(images.shape) < 1:
        raise ValueError("image dimensions must be positive")
    if not np.all(np.isfinite(images)):
        raise ValueError("images contain non-finite values")
    return images


def _axis_geometry(size, k, stride, padding):
    """Output length and (before, after) zero padding along one axis."""
    if padding == "valid":
        if k > size:
            raise ValueError(f"filter size {k} exceeds image size {size} under valid padding")
        return (size - k) // stride + 1, (0, 0)
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return out, (total // 2, total - total // 2)


def output_size(height, width, spec):
    oh, _ = _axis_geometry(height, spec.filter_h, spec.stride, spec.padding)
    ow, _ = _axis_geometry(width, spec.filter_w, spec.stride, spec.padding)
    return oh, ow


def extract_patches(images, spec):
    """Flatten every receptive field into a row.

    Returns
    -------
    patches : ndarray, shape (n * P, T * l_h * l_w)
        Rows ordered by image, then output position (row-major); columns
        ordered by channel, then filter row, then filter column.
    P : int
        Number of output positions per image.
    """
    images = _check_images(images)
    n, T, H, W = images.shape
    lh, lw, s = spec.filter_h, spec.filter_w, spec.stride
    oh, pad_h = _axis_geometry(H, lh, s, spec.padding)
    ow, pad_w = _axis_geometry(W, lw, s, spec.padding)
    padded = np.pad(images, ((0, 0), (0, 0), pad_h, pad_w))
    cols = np.empty((n, T, lh, lw, oh, ow))
    for i in range(lh):
        for j in range(lw):
            cols[:, :, i, j] = padded[:, :, i:i + s * oh:s, j:j + s * ow:s]
    patches = cols.transpose(0, 4, 5, 1, 2, 3).reshape(n * oh * ow, T * lh * lw)
    return patches, oh * ow


def conv_forward(images, filters, spec, activation="identity"):
    """Bias-free convolution with a ``(T*l_h*l_w) x Q`` filter bank, then activation."""
    images = _check_images(images)
    filters = np.asarray(filters, dtype=np.float64)
    n, T, H, W = images.shape
    if filters.shape != (T * spec.filter_h * spec.filter_w, spec.filters):
        raise ValueError(f"filter bank shape {filters.shape} does not match "
                         f"{T} channels and spec {spec}")
    patches, _ = extract_patches(images, spec)
    oh, ow = output_size(H, W, spec)
    out = (patches @ filters).reshape(n, oh, ow, spec.filters).transpose(0, 3, 1, 2)
    return get_activation(activation).fn(out)


def maxpool_forward(images, window=2):
    """Non-overlapping max pooling; trailing rows/cols that do not fill a window are dropped."""
    images = _check_images(images)
    n, C, H, W = images.shape
    oh, ow = H // window, W // window
    if oh < 1 or ow < 1:
        raise ValueError(f"pool window {window} larger than feature map {H}x{W}")
    x = images[:, :, :oh * window, :ow * window]
    return x.reshape(n, C, oh, window, ow, window).max(axis=(3, 5))


def _resolve(alpha, activation):
    return scaling_factor(activation) if alpha == "auto" else float(alpha)


def stein_conv_init(images, y, spec, activation="tanh", alpha="auto", max_rows=None,
                    rng=None):
    """Filter bank ``(T*l_h*l_w) x Q`` from the patch-level cross moment.

    Each image's label is repeated over its ``P`` patches and patch columns
    are standardized before the cross moment is formed. With ``max_rows``
    set, at most that many patch rows (a seeded uniform subsample) enter the
    estimate.
    """
    images = _check_images(images)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != images.shape[0]:
        raise ValueError("one label per image is required")
    T = images.shape[1]
    dim = T * spec.filter_h * spec.filter_w
    if spec.filters > dim:
        raise WidthExceedsRankError(
            f"{spec.filters} filters exceed the patch dimension {dim}")
    patches, P = extract_patches(images, spec)
    labels = np.repeat(y, P)
    if max_rows is not None and patches.shape[0] > max_rows:
        rng = rng if rng is not None else np.random.default_rng(0)
        keep = np.sort(rng.choice(patches.shape[0], size=max_rows, replace=False))
        patches, labels = patches[keep], labels[keep]
    sd = patches.std(axis=0)
    Z = (patches - patches.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    dec = stein_decomposition(Z, labels)
    if np.all(np.abs(dec.eigenvalues) < SIGNAL_EPS):
        raise DegenerateSignalError("patch cross-moment matrix is numerically zero")
    return _resolve(alpha, activation) * dec.eigenvectors[:, :spec.filters]


def init_conv_stack(images, y, layers, activation="tanh", alpha="auto", max_rows=None,
                    rng=None):
    """Initialize a sequence of :class:`ConvLayerSpec` / :class:`MaxPool` entries.

    Each conv layer is initialized on the feature maps produced by the
    layers before it. Returns one filter bank per conv layer.
    """
    x = _check_images(images)
    banks = []
    for layer in layers:
        if isinstance(layer, MaxPool):
            x = maxpool_forward(x, layer.window)
        else:
            F = stein_conv_init(x, y, layer, activation, alpha, max_rows, rng)
            banks.append(F)
            x = conv_forward(x, F, layer, activation)
    return banks


def forward_stack(images, banks, layers, activation="tanh"):
    x = _check_images(images)
    it = iter(banks)
    for layer in layers:
        if isinstance(layer, MaxPool):
            x = maxpool_forward(x, layer.window)
        else:
            x = conv_forward(x, next(it), layer, activation)
    return x


def digit_stack(filters=(9, 18, 36), convs_per_block=3):
    """Three blocks of 3x3 same-padded convolutions, each followed by 2x2 max pooling."""
    layers = []
    for q in filters:
        layers.extend(ConvLayerSpec(q) for _ in range(convs_per_block))
        layers.append(MaxPool(2))
    return layers


def init_cnn(images, y, layers, fc_width=20, activation="tanh", task="binary-classification",
             images_val=None, y_val=None, max_rows=None, rng=None):
    """Conv filter banks, then a Stein dense layer and GLM output on the flattened maps.

    Returns ``(banks, head_params, head_arch)`` where the head is a
    one-hidden-layer network over the flattened final feature maps.
    """
    banks = init_conv_stack(images, y, layers, activation, "auto", max_rows, rng)
    feats = forward_stack(images, banks, layers, activation).reshape(len(images), -1)
    feats_val = None
    if images_val is not None:
        feats_val = forward_stack(images_val, banks, layers, activation).reshape(
            len(images_val), -1)
    arch = Architecture.for_task(feats.shape[1], 1, fc_width, task, activation)
    head = init_network(arch, InitScheme("stein", "glm"), feats, y, feats_val, y_val, rng)
    return banks, head, arch
