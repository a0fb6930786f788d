"""T-shaped adaptive convolution with global and local dilation.

Channel layout of a kernel field (default sizes in brackets)::

    0                      center tap
    1 .. n_short           short wing, opposite the pan direction   [16]
    .. + n_long            long wing, in the pan direction          [32]
    .. + n_up              upper wing                               [16]
    .. + n_down            bottom wing                              [16]

The long wing always points along the pan; the sign of the dilation
carries the direction, so leftward pans reuse the same layout. Vertical
wings step by ``|d|``. Fractional taps are linearly interpolated along the
wing axis with clamp-to-border.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .image import as_field
from .parallel import map_blocks

__all__ = [
    "PanSpec",
    "dilation_schedule",
    "tconv_forward",
    "tconv_backward",
    "blend_forward",
    "blend_backward",
]

REFERENCE_PAN = 153.0


@dataclass(frozen=True)
class PanSpec:
    """Pan amount plus kernel geometry.

    ``dilation_rule="long"`` divides the pan by the long-wing length for
    either direction. ``"literal"`` divides leftward pans by ``n_short``
    instead, i.e. treats the right wing as always being the long one.
    """

    pan_amount: float = REFERENCE_PAN
    n_long: int = 32
    n_short: int = 16
    n_up: int = 16
    n_down: int = 16
    n_dilations: int = 3
    dilation_rule: str = "long"

    def __post_init__(self):
        for name in ("n_long", "n_short", "n_up", "n_down", "n_dilations"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if self.dilation_rule not in ("long", "literal"):
            raise ValueError(f"unknown dilation_rule {self.dilation_rule!r}")
        if not np.isfinite(self.pan_amount):
            raise ValueError("pan_amount must be finite")

    @property
    def channels(self):
        return 1 + self.n_short + self.n_long + self.n_up + self.n_down

    @property
    def short(self):
        return slice(1, 1 + self.n_short)

    @property
    def long(self):
        s = 1 + self.n_short
        return slice(s, s + self.n_long)

    @property
    def up(self):
        s = 1 + self.n_short + self.n_long
        return slice(s, s + self.n_up)

    @property
    def down(self):
        s = 1 + self.n_short + self.n_long + self.n_up
        return slice(s, s + self.n_down)

    @property
    def global_dilation(self):
        p = float(self.pan_amount)
        if p == 0.0:
            raise ValueError("pan_amount must be nonzero")
        if p < 0 and self.dilation_rule == "literal":
            return p / self.n_short
        return p / self.n_long

    def with_pan(self, pan_amount):
        return PanSpec(pan_amount, self.n_long, self.n_short, self.n_up,
                       self.n_down, self.n_dilations, self.dilation_rule)


def dilation_schedule(spec):
    """``[d_1, ..., d_N]`` with ``d_i = (1 + (1 - i) / N) * g_d``."""
    g = spec.global_dilation
    n = spec.n_dilations
    # (N + 1 - i) / N == 1 + (1 - i) / N, ordered to keep 153/32 multiples exact
    return [g * (n + 1 - i) / n for i in range(1, n + 1)]


def _dilations(ds):
    ds = np.asarray(ds, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(ds)) or np.any(ds == 0.0):
        raise ValueError(f"dilations must be finite and nonzero, got {ds.tolist()}")
    return ds


def _check_shapes(img, kernels, spec, weights=None):
    if kernels.shape[:2] != img.shape[:2]:
        raise ValueError(
            f"kernels: spatial size {kernels.shape[:2]} does not match image {img.shape[:2]}")
    if kernels.shape[2] != spec.channels:
        raise ValueError(f"kernels: expected {spec.channels} channels, got {kernels.shape[2]}")
    if weights is not None:
        if weights.shape[:2] != img.shape[:2]:
            raise ValueError(
                f"weights: spatial size {weights.shape[:2]} does not match image {img.shape[:2]}")
        if weights.shape[2] != spec.n_dilations:
            raise ValueError(
                f"weights: expected {spec.n_dilations} channels, got {weights.shape[2]}")


def _forward(img, kernels, weights, dils, spec):
    args = (spec.n_short, spec.n_long, spec.n_up, spec.n_down)

    def block(y0, y1):
        return _k.forward_block(img, kernels, weights, dils, *args, y0, y1)

    return np.concatenate(map_blocks(block, img.shape[0]), axis=0)


def _backward(img, kernels, weights, dils, grad_out, spec):
    if grad_out.shape != img.shape:
        raise ValueError(f"grad_out: shape {grad_out.shape} does not match image {img.shape}")
    h = img.shape[0]
    args = (spec.n_short, spec.n_long, spec.n_up, spec.n_down)
    reach_up = spec.n_up * float(np.max(np.abs(dils)))
    reach_down = spec.n_down * float(np.max(np.abs(dils)))

    def block(y0, y1):
        lo = max(0, int(np.floor(y0 - reach_up)) - 1)
        hi = min(h, int(np.floor(y1 - 1 + reach_down)) + 2)
        gk, gw, gi = _k.backward_block(img, kernels, weights, dils, grad_out,
                                       *args, y0, y1, lo, hi)
        return gk, gw, lo, gi

    res = map_blocks(block, h)
    grad_img = np.zeros(img.shape)
    # merged in block order: bit-identical for any worker count
    for _, _, lo, gi in res:
        grad_img[lo:lo + gi.shape[0]] += gi
    grad_k = np.concatenate([r[0] for r in res], axis=0)
    grad_w = np.concatenate([r[1] for r in res], axis=0)
    return grad_k, grad_w, grad_img


def _unit_weights(img):
    return np.ones(img.shape[:2] + (1,))


def tconv_forward(img, kernels, d, spec=PanSpec()):
    """T-shaped convolution of ``img`` with per-pixel ``kernels`` at dilation ``d``.

    Only the wing sizes of ``spec`` are used; ``d`` sets the tap spacing and,
    through its sign, the direction of the long wing.
    """
    img = as_field(img, "img")
    kernels = as_field(kernels, "kernels")
    _check_shapes(img, kernels, spec)
    return _forward(img, kernels, _unit_weights(img), _dilations([d]), spec)


def tconv_backward(img, kernels, d, grad_out, spec=PanSpec()):
    """Gradients of ``sum(grad_out * tconv_forward(img, kernels, d))``.

    Returns ``(grad_kernels, grad_img)``. Clamped taps send their gradient to
    the border pixel they were clamped onto.
    """
    img = as_field(img, "img")
    kernels = as_field(kernels, "kernels")
    grad_out = as_field(grad_out, "grad_out")
    _check_shapes(img, kernels, spec)
    gk, _, gi = _backward(img, kernels, _unit_weights(img), _dilations([d]), grad_out, spec)
    return gk, gi


def blend_forward(img, kernels, weights, spec):
    """Per-pixel blend of t-convolutions over the dilation schedule of ``spec``."""
    img = as_field(img, "img")
    kernels = as_field(kernels, "kernels")
    weights = as_field(weights, "weights")
    _check_shapes(img, kernels, spec, weights)
    return _forward(img, kernels, weights, _dilations(dilation_schedule(spec)), spec)


def blend_backward(img, kernels, weights, spec, grad_out):
    """Returns ``(grad_kernels, grad_weights, grad_img)`` for ``blend_forward``."""
    img = as_field(img, "img")
    kernels = as_field(kernels, "kernels")
    weights = as_field(weights, "weights")
    grad_out = as_field(grad_out, "grad_out")
    _check_shapes(img, kernels, spec, weights)
    return _backward(img, kernels, weights, _dilations(dilation_schedule(spec)), grad_out, spec)
