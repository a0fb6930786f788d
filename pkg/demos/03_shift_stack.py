"""
The shifted low-resolution stack
================================

Builds the 32-level stack of shifted, halved copies of an image and fuses
a low-resolution panned view back to full size with two simple stages.
"""

import numpy as np

from tkpan import build_stack, fuse
from tkpan.image import downscale_bilinear_2x
from tkpan.srstack import averaging_stage, zero_stage

rng = np.random.default_rng(0)
img = rng.random((32, 64, 3))

st = build_stack(img, 153.0, max_disp=0.25)
print("levels:", st.n_levels, " stride:", st.stride)
print("first strides:", st.strides()[:4], "... last:", st.strides()[-1])
print("level 0 is the plain downscale:", np.array_equal(st.level(0), downscale_bilinear_2x(img)))

flat = build_stack(img, 153.0, max_disp=0.0)
print("max_disp 0 collapses the stack:", all(np.array_equal(lv, flat.level(0)) for lv in flat.levels))

lr_pan = downscale_bilinear_2x(img)
up = fuse(st, lr_pan, zero_stage)
avg = fuse(st, lr_pan, averaging_stage)
print("output shape:", up.shape)
print("mean |avg - bilinear| =", float(np.mean(np.abs(avg - up))))
