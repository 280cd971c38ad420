"""Raw float32 image tensors on disk, plus a converter from the IDX digit format.

Image file: magic ``b"STIM"``, four little-endian uint32 (n, T, H, W), then
``n*T*H*W`` little-endian float32 values in C order. Label file: magic
``b"STLB"``, one uint32 n, then n float32 labels.
"""

import gzip
import struct

import numpy as np

__all__ = ["write_images", "read_images", "write_labels", "read_labels", "read_idx",
           "convert_idx"]

IMAGE_MAGIC = b"STIM"
LABEL_MAGIC = b"STLB"

_IDX_DTYPES = {
    0x08: np.dtype(np.uint8),
    0x09: np.dtype(np.int8),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


def write_images(path, images):
    images = np.asarray(images)
    if images.ndim != 4 or min(images.shape) < 1:
        raise ValueError(f"images must be a non-empty (n, T, H, W) array, got {images.shape}")
    if not np.all(np.isfinite(images)):
        raise ValueError("images contain non-finite values")
    with open(path, "wb") as f:
        f.write(IMAGE_MAGIC + struct.pack("<4I", *images.shape))
        f.write(np.ascontiguousarray(images, dtype="<f4").tobytes())


def _read(path, magic, ndim):
    with open(path, "rb") as f:
        blob = f.read()
    head = 4 + 4 * ndim
    if len(blob) < head or blob[:4] != magic:
        raise ValueError(f"{path}: not a {magic.decode()} file")
    shape = struct.unpack(f"<{ndim}I", blob[4:head])
    count = int(np.prod(shape))
    if len(blob) - head != 4 * count:
        raise ValueError(f"{path}: payload size does not match header {shape}")
    return np.frombuffer(blob, dtype="<f4", offset=head).reshape(shape).astype(np.float64)


def read_images(path):
    return _read(path, IMAGE_MAGIC, 4)


def write_labels(path, labels):
    labels = np.asarray(labels).ravel()
    with open(path, "wb") as f:
        f.write(LABEL_MAGIC + struct.pack("<I", labels.size))
        f.write(labels.astype("<f4").tobytes())


def read_labels(path):
    return _read(path, LABEL_MAGIC, 1)


def read_idx(path):
    """Parse an IDX file (optionally gzipped) into an array of its native dtype."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4 or blob[0] != 0 or blob[1] != 0:
        raise ValueError(f"{path}: bad IDX magic")
    dtype = _IDX_DTYPES.get(blob[2])
    if dtype is None:
        raise ValueError(f"{path}: unknown IDX type code {blob[2]:#x}")
    ndim = blob[3]
    shape = struct.unpack(f">{ndim}I", blob[4:4 + 4 * ndim])
    data = np.frombuffer(blob, dtype=dtype, offset=4 + 4 * ndim)
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: payload size does not match header {shape}")
    return data.reshape(shape)


def convert_idx(images_idx, labels_idx, images_out, labels_out, classes=None, scale=255.0):
    """Convert IDX digits to the raw format, pixel values divided by ``scale``.

    With ``classes=(a, b)`` only those two digits are kept and labelled 0 / 1.
    Returns the number of images written.
    """
    images = read_idx(images_idx).astype(np.float64) / scale
    labels = read_idx(labels_idx).astype(np.float64)
    if images.shape[0] != labels.shape[0]:
        raise ValueError("image and label counts differ")
    if images.ndim == 3:
        images = images[:, None]
    if classes is not None:
        a, b = classes
        keep = (labels == a) | (labels == b)
        images, labels = images[keep], (labels[keep] == b).astype(np.float64)
    write_images(images_out, images)
    write_labels(labels_out, labels)
    return images.shape[0]
