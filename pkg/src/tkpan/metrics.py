"""Reconstruction loss and evaluation metrics (image quality and depth)."""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .image import as_field, check_even, downscale_bilinear_2x

__all__ = [
    "LossReport",
    "pan_loss",
    "avg_pool_extractor",
    "image_metrics",
    "ssim",
    "gaussian_window",
    "DepthMetrics",
    "depth_metrics",
    "format_report",
]

ALPHA_P = 0.01


@dataclass(frozen=True)
class LossReport:
    l1_hr: float
    l1_lr: float
    feature_term: float | None = None
    alpha_p: float = ALPHA_P

    @property
    def total(self):
        feat = 0.0 if self.feature_term is None else self.feature_term
        return self.l1_hr + self.l1_lr + self.alpha_p * feat


def _mse(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"feature shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def pan_loss(gt, out, out_lr, features=None, alpha_p=ALPHA_P):
    """l1 at full and half resolution, plus an optional feature-space term.

    ``features(img)`` must return a sequence of feature arrays (one per
    level); the term sums their mean squared differences at both scales.
    """
    gt = as_field(gt, "I_gt")
    out = as_field(out, "I_o")
    out_lr = as_field(out_lr, "I_o_t")
    check_even(gt, "I_gt")
    if out.shape != gt.shape:
        raise ValueError(f"I_o: shape {out.shape} does not match I_gt {gt.shape}")
    gt_half = downscale_bilinear_2x(gt)
    if out_lr.shape != gt_half.shape:
        raise ValueError(f"I_o_t: shape {out_lr.shape} is not half of I_gt {gt.shape}")
    l1_hr = float(np.mean(np.abs(gt - out)))
    l1_lr = float(np.mean(np.abs(gt_half - out_lr)))
    feat = None
    if features is not None:
        feat = 0.0
        for fa, fb in zip(features(gt), features(out), strict=True):
            feat += _mse(fa, fb)
        for fa, fb in zip(features(gt_half), features(out_lr), strict=True):
            feat += _mse(fa, fb)
    return LossReport(l1_hr, l1_lr, feat, alpha_p)


def _pool2(a):
    h, w = a.shape[0] // 2 * 2, a.shape[1] // 2 * 2
    a = a[:h, :w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def avg_pool_extractor(img, levels=3):
    """Deterministic stand-in for a pretrained feature network: repeated 2x average pooling."""
    feats, cur = [], np.asarray(img, dtype=np.float64)
    for _ in range(levels):
        cur = _pool2(cur)
        feats.append(cur)
    return feats


def gaussian_window(size=11, sigma=1.5):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _filter_valid(a, g):
    r = (len(g) - 1) // 2
    out = correlate1d(a, g, axis=0, mode="constant")
    out = correlate1d(out, g, axis=1, mode="constant")
    return out[r:a.shape[0] - r, r:a.shape[1] - r]


def ssim(pred, gt, peak=255.0, size=11, sigma=1.5, k1=0.01, k2=0.03):
    """Mean SSIM over valid window centers and channels (Gaussian window)."""
    x, y = as_field(pred, "pred"), as_field(gt, "gt")
    if min(x.shape[:2]) < size:
        raise ValueError(f"SSIM needs images of at least {size}x{size}, got {x.shape[:2]}")
    g = gaussian_window(size, sigma)
    c1, c2 = (k1 * peak) ** 2, (k2 * peak) ** 2
    vals = []
    for ch in range(x.shape[2]):
        a, b = x[:, :, ch], y[:, :, ch]
        mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
        s_aa = _filter_valid(a * a, g) - mu_a ** 2
        s_bb = _filter_valid(b * b, g) - mu_b ** 2
        s_ab = _filter_valid(a * b, g) - mu_a * mu_b
        num = (2 * mu_a * mu_b + c1) * (2 * s_ab + c2)
        den = (mu_a ** 2 + mu_b ** 2 + c1) * (s_aa + s_bb + c2)
        vals.append(num / den)
    return float(np.mean(vals))


def image_metrics(pred, gt, peak=255.0):
    """(rmse, psnr, ssim) for images on a ``[0, peak]`` scale.

    Identical images give ``psnr == inf``.
    """
    pred, gt = as_field(pred, "pred"), as_field(gt, "gt")
    if pred.shape != gt.shape:
        raise ValueError(f"pred: shape {pred.shape} does not match gt {gt.shape}")
    rmse = float(np.sqrt(np.mean((pred - gt) ** 2)))
    psnr = float("inf") if rmse == 0.0 else float(20.0 * np.log10(peak / rmse))
    s = 1.0 if rmse == 0.0 else ssim(pred, gt, peak)
    return rmse, psnr, s


@dataclass(frozen=True)
class DepthMetrics:
    abs_rel: float
    sq_rel: float
    rms: float
    log_rms: float
    a1: float
    a2: float
    a3: float

    def as_dict(self):
        return dict(self.__dict__)


def depth_metrics(pred, gt, mask=None):
    """Standard monocular-depth error set over the masked pixels.

    ``mask`` defaults to ``gt > 0``. Threshold accuracies use a strict
    ``max(p/g, g/p) < 1.25**k``.
    """
    p = as_field(pred, "pred")[:, :, 0]
    g = as_field(gt, "gt")[:, :, 0]
    if p.shape != g.shape:
        raise ValueError(f"pred: shape {p.shape} does not match gt {g.shape}")
    if mask is None:
        m = g > 0
    else:
        m = np.asarray(mask)
        if m.ndim == 3:
            m = m[:, :, 0]
        if m.shape != g.shape:
            raise ValueError(f"mask: shape {m.shape} does not match gt {g.shape}")
        m = m.astype(bool)
    if not m.any():
        raise ValueError("mask selects no pixels")
    p, g = p[m], g[m]
    if np.any(p <= 0) or np.any(g <= 0):
        raise ValueError("pred and gt must be positive on the mask")
    thresh = np.maximum(p / g, g / p)
    diff = p - g
    return DepthMetrics(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff ** 2 / g)),
        rms=float(np.sqrt(np.mean(diff ** 2))),
        log_rms=float(np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2))),
        a1=float(np.mean(thresh < 1.25)),
        a2=float(np.mean(thresh < 1.25 ** 2)),
        a3=float(np.mean(thresh < 1.25 ** 3)),
    )


def format_report(pairs):
    """``key=value`` pairs, space separated, 6 significant digits."""
    return " ".join(f"{k}={float(v):.6g}" for k, v in pairs)
