"""
Filter banks for a small convolutional stack
============================================

Every 3x3 patch becomes one sample carrying its image's label, so a
convolution is initialized exactly like a dense layer. Here the labels
depend on whether images contain a horizontal bar.
"""

import numpy as np

from steinit.conv import ConvLayerSpec, MaxPool, forward_stack, init_cnn

rng = np.random.default_rng(0)
n = 400
images = 0.3 * rng.standard_normal((n, 1, 12, 12))
labels = (rng.random(n) < 0.5).astype(float)
rows = rng.integers(1, 11, size=n)
for i in np.flatnonzero(labels):
    images[i, 0, rows[i], 2:10] += 1.0

layers = [ConvLayerSpec(4), ConvLayerSpec(6), MaxPool(2), ConvLayerSpec(8), MaxPool(2)]
banks, head, head_arch = init_cnn(images, labels, layers, fc_width=10)

first = banks[0][:, 0].reshape(3, 3)
print("leading first-layer filter:\n", np.round(first, 2))
for spec, F in zip([l for l in layers if isinstance(l, ConvLayerSpec)], banks):
    print(f"{spec.filters} filters, bank {F.shape}, "
          f"max |F'F - I| = {np.abs(F.T @ F - np.eye(F.shape[1])).max():.1e}")
maps = forward_stack(images, banks, layers)
print("final feature maps:", maps.shape, "-> dense head", head_arch.hidden_widths,
      "with GLM penalty", head.meta["glm_lambda"])
