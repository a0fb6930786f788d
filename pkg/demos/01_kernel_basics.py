"""
A T-shaped kernel, one tap at a time
====================================

Builds a few hand-made kernel fields and shows what they do to an image.
Run from the repository root; PNGs land in ``demo_out/``.
"""

import os

import numpy as np

from tkpan import PanSpec, blend_forward, dilation_schedule, io, primitive_disparity, tconv_forward

os.makedirs("demo_out", exist_ok=True)
spec = PanSpec(153.0)
print("channels:", spec.channels, " global dilation:", spec.global_dilation)
print("dilation schedule:", dilation_schedule(spec))

# a smooth test image with some vertical structure
h, w = 48, 96
yy, xx = np.mgrid[0:h, 0:w]
img = np.stack([0.5 + 0.4 * np.sin(xx / 5.0), 0.5 + 0.4 * np.cos(yy / 7.0),
                (xx % 16 < 8).astype(float) * 0.8 + 0.1], axis=2)
io.write_png("demo_out/center.png", img)

# %%
# The center tap alone copies the image, whatever the dilation.
k = np.zeros((h, w, spec.channels))
k[:, :, 0] = 1.0
print("delta kernel is identity:", np.array_equal(tconv_forward(img, k, 4.78125), img))

# %%
# One long-wing tap moves content by tap * dilation pixels.
# Tap 4 at the first dilation is 4 * 4.78125 = 19.125 px.
k[:] = 0.0
k[:, :, spec.long.start + 3] = 1.0
shifted = tconv_forward(img, k, spec.global_dilation)
io.write_png("demo_out/shift_tap4.png", shifted)
print("tap 4 disparity (normalized):", primitive_disparity(k, spec)[0, 0, 0])

# %%
# Spread the mass across the long wing and the result is a horizontal blur
# toward the pan direction.
k[:] = 0.0
k[:, :, spec.long] = 1.0 / spec.n_long
io.write_png("demo_out/long_wing_uniform.png", tconv_forward(img, k, spec.global_dilation))
print("uniform long wing D_p:", primitive_disparity(k, spec)[0, 0, 0])

# %%
# Blend weights pick a dilation per pixel: left half uses d1, right half d3.
weights = np.zeros((h, w, 3))
weights[:, : w // 2, 0] = 1.0
weights[:, w // 2:, 2] = 1.0
k[:] = 0.0
k[:, :, spec.long.start + 3] = 1.0
io.write_png("demo_out/blend_split.png", blend_forward(img, k, weights, spec))
print("wrote demo_out/*.png")
