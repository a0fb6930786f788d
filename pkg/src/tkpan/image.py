"""Dense image fields and the clamped samplers everything else is built on.

A field is a ``numpy.ndarray`` of shape ``(H, W, C)``. Operators compute in
float64; 32-bit storage only happens in the MNRT file format. Every sampler
uses replicate (clamp-to-border) padding, so any finite coordinate yields a
finite value.
"""

import numpy as np

__all__ = [
    "as_field",
    "check_even",
    "sample_linear_h",
    "sample_linear_v",
    "linear_taps",
    "shift_downscale",
    "downscale_bilinear_2x",
    "upscale_nearest_2x",
    "upscale_bilinear_2x",
]


def as_field(a, name="field"):
    """Return ``a`` as a float64 ``(H, W, C)`` array; 2-D input gets C=1."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or min(arr.shape) < 1:
        raise ValueError(f"{name}: expected an (H, W, C) field, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite values")
    return arr


def check_even(img, name="field"):
    h, w = img.shape[:2]
    if h % 2 or w % 2:
        raise ValueError(f"{name}: height and width must be even, got {h}x{w}")


def _lerp_clamped(line, t):
    n = len(line)
    t = min(max(float(t), 0.0), n - 1.0)
    i0 = int(np.floor(t))
    i1 = min(i0 + 1, n - 1)
    f = t - i0
    return (1.0 - f) * float(line[i0]) + f * float(line[i1])


def sample_linear_h(img, x, y, c):
    """Sample row ``y`` of channel ``c`` at real column ``x``."""
    return _lerp_clamped(img[y, :, c], x)


def sample_linear_v(img, x, y, c):
    """Sample column ``x`` of channel ``c`` at real row ``y``."""
    return _lerp_clamped(img[:, x, c], y)


def linear_taps(coords, n):
    """Clamp ``coords`` to ``[0, n-1]`` and split into (i0, i1, f).

    The sampled value is ``(1 - f) * v[i0] + f * v[i1]``; ``i1`` never
    leaves the grid, so a tap sitting on the last sample has f == 0.
    """
    t = np.clip(np.asarray(coords, dtype=np.float64), 0.0, n - 1.0)
    i0 = np.floor(t).astype(np.intp)
    i1 = np.minimum(i0 + 1, n - 1)
    f = t - i0
    return i0, i1, f


def shift_downscale(img, stride):
    """Shift horizontally by ``stride`` source pixels, then halve both dims.

    Output pixel ``(y', x')`` is the bilinear sample of ``img`` at
    ``(2y' + 0.5, 2x' + 0.5 + stride)`` with border clamp.
    """
    img = as_field(img)
    check_even(img)
    h, w, _ = img.shape
    rows = 0.5 * (img[0::2] + img[1::2])
    x0, x1, f = linear_taps(2.0 * np.arange(w // 2) + 0.5 + float(stride), w)
    f = f[None, :, None]
    return (1.0 - f) * rows[:, x0] + f * rows[:, x1]


def downscale_bilinear_2x(img):
    return shift_downscale(img, 0.0)


def upscale_nearest_2x(img):
    img = as_field(img)
    return np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)


def _upscale_axis(img, axis):
    n = img.shape[axis]
    i0, i1, f = linear_taps((np.arange(2 * n) + 0.5) / 2.0 - 0.5, n)
    shape = [1, 1, 1]
    shape[axis] = 2 * n
    f = f.reshape(shape)
    return (1.0 - f) * np.take(img, i0, axis=axis) + f * np.take(img, i1, axis=axis)


def upscale_bilinear_2x(img):
    """Pixel-center aligned bilinear 2x upscale (inverse grid of the downscale)."""
    img = as_field(img)
    return _upscale_axis(_upscale_axis(img, 0), 1)
