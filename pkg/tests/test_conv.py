import gzip
import struct

import numpy as np
import pytest

from steinit.conv import (
    ConvLayerSpec,
    MaxPool,
    conv_forward,
    digit_stack,
    extract_patches,
    forward_stack,
    init_cnn,
    init_conv_stack,
    maxpool_forward,
    output_size,
    stein_conv_init,
)
from steinit.exceptions import WidthExceedsRankError
from steinit.imagefile import (
    convert_idx,
    read_idx,
    read_images,
    read_labels,
    write_images,
    write_labels,
)


def naive_conv(images, filt, lh, lw, stride, padding):
    """Sliding-window loop; ``filt`` has shape (Q, T, lh, lw)."""
    n, T, H, W = images.shape
    if padding == "same":
        oh, ow = -(-H // stride), -(-W // stride)
        ph = max((oh - 1) * stride + lh - H, 0)
        pw = max((ow - 1) * stride + lw - W, 0)
        top, left = ph // 2, pw // 2
    else:
        oh, ow = (H - lh) // stride + 1, (W - lw) // stride + 1
        top = left = 0
    out = np.zeros((n, filt.shape[0], oh, ow))
    for i in range(n):
        for q in range(filt.shape[0]):
            for r in range(oh):
                for c in range(ow):
                    acc = 0.0
                    for t in range(T):
                        for a in range(lh):
                            for b in range(lw):
                                y, x = r * stride + a - top, c * stride + b - left
                                if 0 <= y < H and 0 <= x < W:
                                    acc += images[i, t, y, x] * filt[q, t, a, b]
                    out[i, q, r, c] = acc
    return out


def naive_pool(images, k):
    n, C, H, W = images.shape
    out = np.empty((n, C, H // k, W // k))
    for idx in np.ndindex(out.shape):
        i, c, r, s = idx
        out[idx] = max(images[i, c, r * k + a, s * k + b] for a in range(k) for b in range(k))
    return out


def test_patch_counts():
    _, P = extract_patches(np.zeros((1, 1, 4, 4)), ConvLayerSpec(1, padding="valid"))
    assert P == 4
    patches, P = extract_patches(np.zeros((2, 1, 7, 5)), ConvLayerSpec(1))
    assert P == 35
    assert patches.shape == (70, 9)


def test_patch_layout():
    img = np.arange(2 * 3 * 3, dtype=float).reshape(1, 2, 3, 3)
    patches, _ = extract_patches(img, ConvLayerSpec(1, 2, 2, padding="valid"))
    # first patch: channel 0 rows (0,1),(3,4) then channel 1 rows (9,10),(12,13)
    np.testing.assert_array_equal(patches[0], [0, 1, 3, 4, 9, 10, 12, 13])
    # second row is the position one step to the right
    np.testing.assert_array_equal(patches[1], [1, 2, 4, 5, 10, 11, 13, 14])


def test_same_padding_extra_on_bottom_right():
    img = np.arange(16.0).reshape(1, 1, 4, 4)
    patches, P = extract_patches(img, ConvLayerSpec(1, 2, 2))
    assert P == 16
    np.testing.assert_array_equal(patches[0], [0, 1, 4, 5])
    np.testing.assert_array_equal(patches[-1], [15, 0, 0, 0])


@pytest.mark.parametrize("stride", [1, 2, 3])
@pytest.mark.parametrize("padding", ["same", "valid"])
@pytest.mark.parametrize("lh,lw", [(3, 3), (2, 3), (1, 1), (4, 2)])
def test_conv_matches_naive(rng, stride, padding, lh, lw):
    images = rng.standard_normal((2, 3, 7, 6))
    spec = ConvLayerSpec(4, lh, lw, stride, padding)
    filt = rng.standard_normal((4, 3, lh, lw))
    bank = filt.reshape(4, -1).T
    got = conv_forward(images, bank, spec)
    ref = naive_conv(images, filt, lh, lw, stride, padding)
    assert got.shape == ref.shape
    assert np.abs(got - ref).max() < 1e-12
    assert got.shape[2:] == output_size(7, 6, spec)


def test_valid_filter_too_large():
    with pytest.raises(ValueError):
        extract_patches(np.zeros((1, 1, 2, 2)), ConvLayerSpec(1, padding="valid"))


def test_conv_shape_mismatch(rng):
    with pytest.raises(ValueError):
        conv_forward(rng.standard_normal((1, 2, 4, 4)), np.ones((9, 1)), ConvLayerSpec(1))


def test_spec_validation():
    with pytest.raises(ValueError):
        ConvLayerSpec(0)
    with pytest.raises(ValueError):
        ConvLayerSpec(1, padding="full")


def test_identity_filter(rng):
    images = rng.standard_normal((2, 1, 5, 5))
    out = conv_forward(images, np.ones((1, 1)), ConvLayerSpec(1, 1, 1), "tanh")
    np.testing.assert_allclose(out, np.tanh(images), atol=1e-15)


def test_maxpool(rng):
    const = np.full((1, 2, 6, 7), 3.5)
    out = maxpool_forward(const)
    assert out.shape == (1, 2, 3, 3)
    assert np.all(out == 3.5)
    images = rng.standard_normal((2, 3, 7, 5))
    np.testing.assert_array_equal(maxpool_forward(images), naive_pool(images, 2))


def test_spatial_bookkeeping():
    x = np.zeros((1, 1, 28, 28))
    assert conv_forward(x, np.zeros((9, 2)), ConvLayerSpec(2)).shape[2:] == (28, 28)
    assert conv_forward(x, np.zeros((25, 2)), ConvLayerSpec(2, 5, 5, padding="valid")
                        ).shape[2:] == (24, 24)
    assert maxpool_forward(np.zeros((1, 1, 7, 9))).shape[2:] == (3, 4)


def test_filter_bank_shape_and_orthogonality(rng):
    images = rng.standard_normal((10, 3, 6, 6))
    F = stein_conv_init(images, rng.random(10), ConvLayerSpec(9))
    assert F.shape == (27, 9)
    assert np.abs(F.T @ F - np.eye(9)).max() < 1e-8
    G = stein_conv_init(images, rng.random(10), ConvLayerSpec(9), activation="sigmoid")
    assert np.abs(G.T @ G - 16 * np.eye(9)).max() < 1e-8


def test_too_many_filters(rng):
    with pytest.raises(WidthExceedsRankError):
        stein_conv_init(rng.standard_normal((3, 1, 5, 5)), np.ones(3), ConvLayerSpec(10))


def test_label_count_mismatch(rng):
    with pytest.raises(ValueError):
        stein_conv_init(rng.standard_normal((3, 1, 5, 5)), np.ones(4), ConvLayerSpec(2))


def test_image_order_invariance(rng):
    images = rng.standard_normal((12, 2, 5, 5))
    y = rng.random(12)
    perm = rng.permutation(12)
    spec = ConvLayerSpec(5)
    a = stein_conv_init(images, y, spec)
    b = stein_conv_init(images[perm], y[perm], spec)
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_planted_template():
    """Labels depend on the squared response of one patch template."""
    r = np.random.default_rng(0)
    template = r.standard_normal(9)
    template /= np.linalg.norm(template)
    images = r.standard_normal((3000, 1, 6, 6))
    spec = ConvLayerSpec(1, padding="valid")
    patches, P = extract_patches(images, spec)
    resp = (patches @ template).reshape(3000, P)
    y = (resp ** 2).mean(axis=1)
    F = stein_conv_init(images, y, spec)
    cos = abs(F[:, 0] @ template) / np.linalg.norm(F[:, 0])
    assert cos > 0.8


def test_row_budget_subsamples(rng):
    images = rng.standard_normal((20, 1, 8, 8))
    y = rng.random(20)
    spec = ConvLayerSpec(3)
    F = stein_conv_init(images, y, spec, max_rows=200, rng=np.random.default_rng(1))
    G = stein_conv_init(images, y, spec, max_rows=200, rng=np.random.default_rng(1))
    np.testing.assert_array_equal(F, G)
    assert np.abs(F.T @ F - np.eye(3)).max() < 1e-8
    assert not np.allclose(F, stein_conv_init(images, y, spec))


def test_single_layer_stack_equals_layer_init(rng):
    images = rng.standard_normal((8, 2, 5, 5))
    y = rng.random(8)
    spec = ConvLayerSpec(4)
    (F,) = init_conv_stack(images, y, [spec])
    np.testing.assert_array_equal(F, stein_conv_init(images, y, spec))


def test_digit_stack_shapes():
    r = np.random.default_rng(0)
    images = r.random((12, 1, 28, 28))
    y = (r.random(12) < 0.5).astype(float)
    layers = digit_stack()
    banks = init_conv_stack(images, y, layers, max_rows=4000, rng=np.random.default_rng(0))
    qs = [b.shape[1] for b in banks]
    assert qs == [9] * 3 + [18] * 3 + [36] * 3
    assert [b.shape[0] for b in banks] == [9, 81, 81, 81, 162, 162, 162, 324, 324]
    for F in banks:
        assert np.abs(F.T @ F - np.eye(F.shape[1])).max() < 1e-8
    assert forward_stack(images, banks, layers).shape == (12, 36, 3, 3)


def test_cnn_head():
    r = np.random.default_rng(0)
    images = r.random((60, 1, 8, 8))
    y = (images[:, 0, :4].mean(axis=(1, 2)) > 0.5).astype(float)
    layers = [ConvLayerSpec(3), MaxPool(), ConvLayerSpec(4), MaxPool()]
    banks, head, arch = init_cnn(images, y, layers, fc_width=10)
    assert arch.input_dim == 4 * 2 * 2
    assert head.weights[0].shape == (16, 10)
    assert "glm_lambda" in head.meta


def test_image_file_round_trip(tmp_path, rng):
    images = rng.random((3, 2, 4, 5)).astype(np.float32)
    write_images(tmp_path / "x.stim", images)
    np.testing.assert_array_equal(read_images(tmp_path / "x.stim"), images)
    write_labels(tmp_path / "y.stlb", [0, 1, 1])
    np.testing.assert_array_equal(read_labels(tmp_path / "y.stlb"), [0, 1, 1])
    raw = (tmp_path / "x.stim").read_bytes()
    assert raw[:4] == b"STIM"
    assert struct.unpack("<4I", raw[4:20]) == (3, 2, 4, 5)
    (tmp_path / "bad.stim").write_bytes(raw[:-4])
    with pytest.raises(ValueError):
        read_images(tmp_path / "bad.stim")
    with pytest.raises(ValueError):
        read_labels(tmp_path / "x.stim")


def write_idx(path, arr, code=0x08):
    header = bytes([0, 0, code, arr.ndim]) + struct.pack(f">{arr.ndim}I", *arr.shape)
    with gzip.open(path, "wb") as f:
        f.write(header + arr.astype(">u1").tobytes())


def test_idx_conversion(tmp_path, rng):
    imgs = rng.integers(0, 256, size=(6, 4, 4)).astype(np.uint8)
    labels = np.array([3, 5, 3, 7, 5, 5], dtype=np.uint8)
    write_idx(tmp_path / "i.gz", imgs)
    write_idx(tmp_path / "l.gz", labels)
    np.testing.assert_array_equal(read_idx(tmp_path / "i.gz"), imgs)
    count = convert_idx(tmp_path / "i.gz", tmp_path / "l.gz", tmp_path / "o.stim",
                        tmp_path / "o.stlb", classes=(3, 5))
    assert count == 5
    out = read_images(tmp_path / "o.stim")
    assert out.shape == (5, 1, 4, 4)
    np.testing.assert_allclose(out[0, 0], imgs[0] / 255.0, atol=1e-7)
    np.testing.assert_array_equal(read_labels(tmp_path / "o.stlb"), [0, 1, 0, 1, 1])
