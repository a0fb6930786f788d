"""Synthetic layered scenes with exact geometry, and a per-pixel optimizer
that fits kernel/blend logits to reproduce the panned view.

No network is involved: every pixel owns its own 81 kernel logits and N
blend logits, so whatever structure the fitted kernels show comes from the
operator and the loss alone.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import local_disparity, primitive_disparity, primitive_occlusion
from .image import check_even, linear_taps
from .metrics import LossReport, depth_metrics, image_metrics
from .tkernel import PanSpec, blend_backward, blend_forward

__all__ = [
    "SceneOracle",
    "make_scene",
    "TrainState",
    "softmax",
    "train_toy",
    "eval_toy",
    "border_mask",
    "TrainingDiverged",
]

KINDS = ("checker", "noise", "bars")
GD_STEP = 50.0
ADAM_STEP = 0.1
DEFAULT_SMOOTH = 2.0


@dataclass
class SceneOracle:
    """Layered fronto-parallel scene rendered at the center and panned views.

    ``layers`` go front to back; each is ``(texture, mask, disparity_px)``.
    All geometry maps live on the panned (target) view grid, which is where
    a kernel field predicts: ``disparity`` is the pixel shift of the visible
    layer, ``occlusion`` marks target pixels whose source point is hidden by
    a nearer layer in the center view, and ``in_frame`` marks pixels whose
    source point lies inside the center image.
    """

    center: np.ndarray
    panned: np.ndarray
    disparity: np.ndarray
    occlusion: np.ndarray
    in_frame: np.ndarray
    pan_amount: float
    layers: list = field(repr=False)

    @property
    def normalized_disparity(self):
        return self.disparity / abs(self.pan_amount)


def _texture(kind, h, w, c, rng):
    if kind == "checker":
        period = int(rng.integers(3, 7))
        yy, xx = np.mgrid[0:h, 0:w]
        cells = ((yy // period + xx // period) % 2)[:, :, None]
        lo, hi = rng.uniform(0.05, 0.45, c), rng.uniform(0.55, 0.95, c)
        return np.where(cells == 1, hi, lo)
    if kind == "noise":
        tex = gaussian_filter(rng.random((h, w, c)), sigma=(0.5, 0.5, 0.0), mode="nearest")
        lo, hi = tex.min(), tex.max()
        return 0.05 + 0.9 * (tex - lo) / (hi - lo)
    if kind == "bars":
        cols = np.empty((w, c))
        x = 0
        while x < w:
            bw = int(rng.integers(2, 7))
            cols[x:x + bw] = rng.uniform(0.05, 0.95, c)
            x += bw
        return np.broadcast_to(cols[None], (h, w, c)).copy()
    raise ValueError(f"unknown scene kind {kind!r}, expected one of {KINDS}")


def _shift_h(a, shift):
    """``out[:, x] = a[:, x + shift]`` with linear interpolation and clamp."""
    i0, i1, f = linear_taps(np.arange(a.shape[1]) + shift, a.shape[1])
    f = f[None, :, None]
    return (1.0 - f) * a[:, i0] + f * a[:, i1]


def make_scene(kind, height, width, disparities, seed=0, pan_amount=153.0,
               ref_pan=None, channels=3):
    """Build a layered scene; ``disparities`` (pixels at ``ref_pan``) run front to back.

    The last layer is a full-frame background; each nearer layer is a
    textured rectangle. Disparities scale by ``pan_amount / ref_pan`` and
    their sign follows the pan, so a rightward pan samples ``x + disparity``.
    """
    if height % 2 or width % 2:
        raise ValueError(f"scene dims must be even, got {height}x{width}")
    disparities = [float(d) for d in disparities]
    if not disparities:
        raise ValueError("need at least one layer")
    if pan_amount == 0:
        raise ValueError("pan_amount must be nonzero")
    ref_pan = abs(pan_amount) if ref_pan is None else float(ref_pan)
    if any(b >= a for a, b in zip(disparities, disparities[1:])):
        raise ValueError("disparities must be strictly decreasing front to back")
    if any(d < 0 for d in disparities):
        raise ValueError("disparities must be nonnegative")
    scale = pan_amount / ref_pan
    shifts = [d * scale for d in disparities]
    if any(abs(s) >= abs(pan_amount) for s in shifts):
        raise ValueError(f"layer disparity must stay below |pan_amount|={abs(pan_amount)}")

    rng = np.random.default_rng(seed)
    n = len(disparities)
    layers = []
    for j, s in enumerate(shifts):
        tex = _texture(kind, height, width, channels, rng)
        if j == n - 1:
            mask = np.ones((height, width, 1))
        else:
            mask = np.zeros((height, width, 1))
            rh = int(rng.integers(height // 3, height // 2 + 1))
            rw = int(rng.integers(width // 5, width // 3 + 1))
            y0 = int(rng.integers(height // 8, height - rh - height // 8 + 1))
            x0 = int(rng.integers(width // 8, width - rw - width // 8 + 1))
            mask[y0:y0 + rh, x0:x0 + rw] = 1.0
        layers.append((tex, mask, s))

    center = np.zeros((height, width, channels))
    panned = np.zeros((height, width, channels))
    disparity = np.zeros((height, width, 1))
    owner = np.full((height, width), n - 1)
    for j in reversed(range(n)):
        tex, mask, s = layers[j]
        center = mask * tex + (1.0 - mask) * center
        m_s = _shift_h(mask, s)
        panned = m_s * _shift_h(tex, s) + (1.0 - m_s) * panned
        front = m_s[:, :, 0] > 0.5
        owner[front] = j
        disparity[front] = abs(s)

    xs = np.arange(width, dtype=np.float64)
    occlusion = np.zeros((height, width, 1), dtype=bool)
    in_frame = np.zeros((height, width, 1), dtype=bool)
    for j, (_, _, s) in enumerate(layers):
        src = xs + s
        inside = (src >= 0) & (src <= width - 1)
        sel = owner == j
        in_frame[:, :, 0] |= sel & inside[None, :]
        for k in range(j):
            covered = _shift_h(layers[k][1], s)[:, :, 0] > 0.5
            occlusion[:, :, 0] |= sel & covered
    return SceneOracle(center, panned, disparity, occlusion, in_frame,
                       float(pan_amount), layers)


def softmax(logits, axis=-1):
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _softmax_vjp(p, g):
    return p * (g - np.sum(p * g, axis=-1, keepdims=True))


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainState:
    kernel_logits: np.ndarray
    blend_logits: np.ndarray
    step: int = 0
    moments: dict | None = None
    loss_history: list = field(default_factory=list)

    @classmethod
    def uniform(cls, height, width, spec):
        return cls(np.zeros((height, width, spec.channels)),
                   np.zeros((height, width, spec.n_dilations)))

    @property
    def kernels(self):
        return softmax(self.kernel_logits)

    @property
    def weights(self):
        return softmax(self.blend_logits)

    @property
    def best_so_far(self):
        return np.minimum.accumulate(self.loss_history).tolist()


def _loss_and_grads(scene, spec, state):
    k, w = state.kernels, state.weights
    out = blend_forward(scene.center, k, w, spec)
    diff = out - scene.panned
    loss = float(np.mean(np.abs(diff)))
    g_out = np.sign(diff) / diff.size
    gk, gw, _ = blend_backward(scene.center, k, w, spec, g_out)
    return loss, _softmax_vjp(k, gk), _softmax_vjp(w, gw)


def train_toy(scene, spec, iters, step_size=None, seed=0, adam=False,
              betas=(0.5, 0.999), eps=1e-8, smooth=DEFAULT_SMOOTH, state=None):
    """Fit per-pixel logits by (sub)gradient descent on the l1 reconstruction loss.

    Starts from all-zero logits (uniform kernels and blend weights) unless a
    ``state`` is passed. Gradients are taken per pixel (the image-mean loss
    times the pixel count) and then Gaussian-smoothed over ``smooth`` pixels
    before the step. Without that spatial coupling each pixel has ~84 free
    parameters against C observed values, and the fit reproduces the view
    with geometrically meaningless tap mixtures.

    ``adam=True`` switches to adaptive moments. ``step_size`` defaults to
    50 for plain descent and 0.1 for adaptive moments. Losses
    are recorded before every update and once after the last, so the
    history has ``iters + 1`` entries. The run is fully deterministic;
    ``seed`` is only recorded in the state for provenance.

    Returns ``(state, reports)`` with one ``LossReport`` per history entry.
    """
    check_even(scene.center, "scene")
    if int(iters) != iters or iters < 0:
        raise ValueError(f"iters must be a nonnegative integer, got {iters}")
    if spec.pan_amount != scene.pan_amount:
        raise ValueError(f"spec pan {spec.pan_amount} does not match scene pan {scene.pan_amount}")
    h, w = scene.center.shape[:2]
    if state is None:
        state = TrainState.uniform(h, w, spec)
    state.moments = state.moments or {"seed": seed}
    if adam and "m_k" not in state.moments:
        state.moments.update(m_k=np.zeros_like(state.kernel_logits),
                             v_k=np.zeros_like(state.kernel_logits),
                             m_w=np.zeros_like(state.blend_logits),
                             v_w=np.zeros_like(state.blend_logits))
    if step_size is None:
        step_size = ADAM_STEP if adam else GD_STEP
    b1, b2 = betas
    for _ in range(int(iters)):
        loss, g_k, g_w = _loss_and_grads(scene, spec, state)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {state.step}")
        state.loss_history.append(loss)
        # per-pixel gradients are O(1/npix); undo that so step_size acts per pixel
        scale = g_k.shape[0] * g_k.shape[1]
        g_k, g_w = g_k * scale, g_w * scale
        if smooth > 0:
            g_k = gaussian_filter(g_k, (smooth, smooth, 0), mode="nearest")
            g_w = gaussian_filter(g_w, (smooth, smooth, 0), mode="nearest")
        if adam:
            mo, t = state.moments, state.step + 1
            for key, g in (("k", g_k), ("w", g_w)):
                mo["m_" + key] = b1 * mo["m_" + key] + (1 - b1) * g
                mo["v_" + key] = b2 * mo["v_" + key] + (1 - b2) * g * g
            upd_k = (mo["m_k"] / (1 - b1 ** t)) / (np.sqrt(mo["v_k"] / (1 - b2 ** t)) + eps)
            upd_w = (mo["m_w"] / (1 - b1 ** t)) / (np.sqrt(mo["v_w"] / (1 - b2 ** t)) + eps)
        else:
            upd_k, upd_w = g_k, g_w
        state.kernel_logits = state.kernel_logits - step_size * upd_k
        state.blend_logits = state.blend_logits - step_size * upd_w
        state.step += 1
    out = blend_forward(scene.center, state.kernels, state.weights, spec)
    final = float(np.mean(np.abs(out - scene.panned)))
    if not np.isfinite(final):
        raise TrainingDiverged(f"non-finite loss at step {state.step}")
    state.loss_history.append(final)
    reports = [LossReport(v, 0.0) for v in state.loss_history]
    return state, reports


def border_mask(scene, margin=2):
    """In-frame pixels at least ``margin`` pixels from the image edge."""
    h, w = scene.center.shape[:2]
    m = np.zeros((h, w, 1), dtype=bool)
    m[margin:h - margin, margin:w - margin] = True
    return m & scene.in_frame


def eval_toy(state, scene, spec, mask=None):
    """Reconstruction quality and disparity accuracy against the oracle.

    Disparity is read with ``local_disparity`` (blend-aware) and compared
    with the exact normalized disparity over non-occluded, in-frame pixels
    away from the border (or over ``mask``). The plain long-wing
    ``primitive_disparity`` error is reported alongside.
    """
    k, w = state.kernels, state.weights
    if k.shape[:2] != scene.center.shape[:2]:
        raise ValueError(f"state shape {k.shape[:2]} does not match scene {scene.center.shape[:2]}")
    recon = blend_forward(scene.center, k, w, spec)
    disp = local_disparity(k, w, spec)
    prim = primitive_disparity(k, spec)
    if mask is None:
        mask = border_mask(scene) & ~scene.occlusion
    gt = scene.normalized_disparity
    m = mask & (gt > 0)
    dm = depth_metrics(np.maximum(disp, 1e-6), gt, m) if m.any() else None
    rmse, psnr, s = image_metrics(recon * 255.0, scene.panned * 255.0)
    return {
        "recon": recon,
        "disparity": disp,
        "primitive_disparity": prim,
        "occlusion": primitive_occlusion(k, spec),
        "rmse": rmse,
        "psnr": psnr,
        "ssim": s,
        "l1": float(np.mean(np.abs(recon - scene.panned))),
        "disp_mae": float(np.mean(np.abs(disp - gt)[mask])) if mask.any() else float("nan"),
        "primitive_mae": float(np.mean(np.abs(prim - gt)[mask])) if mask.any() else float("nan"),
        "depth": dm,
    }
