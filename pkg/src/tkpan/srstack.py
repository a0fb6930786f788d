"""Shifted-downscaled center-view stack and the low-to-full resolution fusion.

The learned fusion convolutions are not part of this package; ``fuse``
takes any callable stage with the contract below and ships two fixed ones.
"""

from dataclasses import dataclass

import numpy as np

from .image import as_field, check_even, shift_downscale, upscale_bilinear_2x, upscale_nearest_2x
from .parallel import map_items

__all__ = ["ShiftStack", "build_stack", "fuse", "zero_stage", "averaging_stage"]

DEFAULT_LEVELS = 32


@dataclass
class ShiftStack:
    levels: list
    pan_amount: float
    max_disp: float

    @property
    def n_levels(self):
        return len(self.levels)

    @property
    def stride(self):
        """Shift between consecutive levels, in source pixels."""
        return stack_stride(self.pan_amount, self.max_disp, self.n_levels)

    def strides(self):
        return [n * self.stride for n in range(self.n_levels)]

    def level(self, n):
        return self.levels[n]


def stack_stride(pan_amount, max_disp, n_levels):
    return pan_amount / n_levels * max_disp


def build_stack(img, pan_amount, max_disp, n_levels=DEFAULT_LEVELS):
    """Level ``n`` is ``img`` shifted by ``n * P_a / N_s * max_disp`` then halved.

    Level 0 is always the unshifted downscale.
    """
    img = as_field(img, "img")
    check_even(img, "img")
    if int(n_levels) != n_levels or n_levels < 1:
        raise ValueError(f"n_levels must be a positive integer, got {n_levels}")
    if not 0.0 <= max_disp <= 1.0:
        raise ValueError(f"max_disp must lie in [0, 1], got {max_disp}")
    step = stack_stride(float(pan_amount), float(max_disp), int(n_levels))
    levels = map_items(lambda n: shift_downscale(img, n * step), range(int(n_levels)))
    return ShiftStack(levels, float(pan_amount), float(max_disp))


def zero_stage(lr_input, n_levels, channels):
    """Contributes nothing: ``fuse`` reduces to a bilinear upscale."""
    return np.zeros(lr_input.shape[:2] + (channels,))


def averaging_stage(lr_input, n_levels, channels):
    """Residual toward the mean of the stack levels."""
    h, w, _ = lr_input.shape
    stack = lr_input[:, :, :n_levels * channels].reshape(h, w, n_levels, channels)
    pan = lr_input[:, :, n_levels * channels:]
    return stack.mean(axis=2) - pan


def fuse(stack, lr_pan, stage=zero_stage):
    """Bring the low-res panned view to full resolution.

    ``stage(lr_input, n_levels, channels)`` receives the stack levels and
    ``lr_pan`` concatenated along channels (levels first) and must return an
    ``(h, w, channels)`` correction. The output is the nearest-upscaled
    correction plus the bilinear upscale of ``lr_pan``.
    """
    lr_pan = as_field(lr_pan, "lr_pan")
    h, w, c = lr_pan.shape
    for n, lv in enumerate(stack.levels):
        if lv.shape != lr_pan.shape:
            raise ValueError(f"stack level {n}: shape {lv.shape} does not match lr_pan {lr_pan.shape}")
    lr_input = np.concatenate(list(stack.levels) + [lr_pan], axis=2)
    res = np.asarray(stage(lr_input, stack.n_levels, c), dtype=np.float64)
    if res.shape != (h, w, c):
        raise ValueError(f"fusion stage returned shape {res.shape}, expected {(h, w, c)}")
    if not np.all(np.isfinite(res)):
        raise ValueError("fusion stage returned non-finite values")
    return upscale_nearest_2x(res) + upscale_bilinear_2x(lr_pan)
