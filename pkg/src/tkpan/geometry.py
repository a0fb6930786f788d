"""Disparity and occlusion read straight off a kernel field, plus the
ambiguity-weighted blend of two disparity estimates and baseline scaling."""

from dataclasses import dataclass, field

import numpy as np

from .image import as_field, downscale_bilinear_2x
from .tkernel import PanSpec, dilation_schedule

__all__ = [
    "primitive_disparity",
    "local_disparity",
    "primitive_occlusion",
    "max_disparity",
    "BaselineTable",
    "scale_pan",
    "spp_blend",
    "primitive_disparity_loss",
    "PRIMITIVE_LOSS_WEIGHT",
]

PRIMITIVE_LOSS_WEIGHT = 0.5


def _kernels(kernels, spec):
    k = as_field(kernels, "kernels")
    if k.shape[2] != spec.channels:
        raise ValueError(f"kernels: expected {spec.channels} channels, got {k.shape[2]}")
    return k


def primitive_disparity(kernels, spec=PanSpec()):
    """Expected long-wing tap index over ``n_long``, clamped to [0, 1].

    1.0 means a shift of ``|P_a|`` pixels. Leftward pans need no special
    case since the long wing always sits in the same channels.
    """
    k = _kernels(kernels, spec)
    idx = np.arange(1, spec.n_long + 1, dtype=np.float64) / spec.n_long
    d = np.einsum("hwk,k->hw", k[:, :, spec.long], idx)
    return np.clip(d, 0.0, 1.0)[:, :, None]


def local_disparity(kernels, weights, spec=PanSpec()):
    """Disparity of a blended kernel: each dilation scales the tap spacing.

    A long-wing tap ``k`` at dilation ``d_i`` shifts by ``k * d_i`` pixels,
    so with blend weights the normalized shift is
    ``sum_i w_i * (d_i / g_d) * D_p``. Taps 4, 6 and 12 at the default
    three dilations all land on the same point; this reads them alike,
    whereas ``primitive_disparity`` alone cannot tell them apart.
    """
    k = _kernels(kernels, spec)
    w = as_field(weights, "weights")
    if w.shape[:2] != k.shape[:2] or w.shape[2] != spec.n_dilations:
        raise ValueError(f"weights: expected shape {k.shape[:2] + (spec.n_dilations,)}, got {w.shape}")
    idx = np.arange(1, spec.n_long + 1, dtype=np.float64) / spec.n_long
    d = np.einsum("hwk,k->hw", k[:, :, spec.long], idx)
    ratios = np.asarray(dilation_schedule(spec)) / spec.global_dilation
    return np.clip(d * np.einsum("hwi,i->hw", w, ratios), 0.0, 1.0)[:, :, None]


def primitive_occlusion(kernels, spec=PanSpec()):
    """Total kernel mass on the short, upper and bottom wings."""
    k = _kernels(kernels, spec)
    o = (k[:, :, spec.short].sum(axis=2) + k[:, :, spec.up].sum(axis=2)
         + k[:, :, spec.down].sum(axis=2))
    return o[:, :, None]


def max_disparity(kernels, spec=PanSpec()):
    return float(primitive_disparity(kernels, spec).max())


@dataclass
class BaselineTable:
    """Stereo baselines (any consistent length unit) keyed by dataset tag."""

    baselines: dict = field(default_factory=dict)
    reference: str = "kitti"

    def __post_init__(self):
        if self.reference not in self.baselines:
            raise ValueError(f"reference tag {self.reference!r} not in table")
        for tag, b in self.baselines.items():
            if not (np.isfinite(b) and b > 0):
                raise ValueError(f"baseline for {tag!r} must be positive, got {b}")

    @classmethod
    def parse(cls, text, reference):
        """Parse ``"kitti=54,cs=22"``."""
        pairs = {}
        for item in text.split(","):
            tag, sep, val = item.partition("=")
            if not sep or not tag.strip():
                raise ValueError(f"bad baseline entry {item!r}, expected tag=value")
            pairs[tag.strip()] = float(val)
        return cls(pairs, reference)


KITTI_CS_VL = BaselineTable({"kitti": 54.0, "cityscapes": 22.0, "viclab": 12.0}, "kitti")


def scale_pan(table, dataset, reference_pan):
    """Pan amount for ``dataset`` given the pan used at the reference baseline."""
    if dataset not in table.baselines:
        raise KeyError(f"unknown dataset tag {dataset!r}")
    return reference_pan * (table.baselines[dataset] / table.baselines[table.reference])


def spp_blend(disp_fwd, disp_bwd, amb_fwd, amb_bwd):
    """Blend two disparity maps by a per-pixel softmax over their ambiguity logits."""
    maps = [as_field(a, n) for a, n in ((disp_fwd, "disp_fwd"), (disp_bwd, "disp_bwd"),
                                        (amb_fwd, "amb_fwd"), (amb_bwd, "amb_bwd"))]
    shape = maps[0].shape
    for m, n in zip(maps, ("disp_fwd", "disp_bwd", "amb_fwd", "amb_bwd")):
        if m.shape[2] != 1:
            raise ValueError(f"{n}: expected 1 channel, got {m.shape[2]}")
        if m.shape != shape:
            raise ValueError(f"{n}: shape {m.shape} does not match disp_fwd {shape}")
    df, db, af, ab = maps
    top = np.maximum(af, ab)
    ef = np.exp(af - top)
    eb = np.exp(ab - top)
    s = ef / (ef + eb)
    return s * df + (1.0 - s) * db


def primitive_disparity_loss(d_op, d_cp, d_o, d_c):
    """Unweighted l1 between half-res primitives and downscaled refined maps.

    The caller applies ``PRIMITIVE_LOSS_WEIGHT``.
    """
    d_op, d_cp = as_field(d_op, "D_op"), as_field(d_cp, "D_cp")
    d_o, d_c = as_field(d_o, "D_o"), as_field(d_c, "D_c")
    for prim, full, n in ((d_op, d_o, "D_o"), (d_cp, d_c, "D_c")):
        if full.shape[0] != 2 * prim.shape[0] or full.shape[1] != 2 * prim.shape[1] \
                or full.shape[2] != prim.shape[2]:
            raise ValueError(f"{n}: shape {full.shape} is not twice the primitive {prim.shape}")
    return float(np.mean(np.abs(d_op - downscale_bilinear_2x(d_o)))
                 + np.mean(np.abs(d_cp - downscale_bilinear_2x(d_c))))
