"""Central finite-difference check of the blend gradients.

The scalar loss is ``L = sum(blend_forward(...) ** 2)``. Since the forward
pass is linear in each of kernels, weights and image, ``L`` is quadratic
along every coordinate and central differences are exact up to rounding.
"""

import numpy as np

from .tkernel import PanSpec, blend_backward, blend_forward

GROUPS = ("kernels", "weights", "img")


def random_instance(seed, height, width, channels=3, spec=PanSpec()):
    rng = np.random.default_rng(seed)
    img = rng.random((height, width, channels))
    kernels = rng.random((height, width, spec.channels))
    kernels /= kernels.sum(axis=2, keepdims=True)
    weights = rng.random((height, width, spec.n_dilations))
    weights /= weights.sum(axis=2, keepdims=True)
    return img, kernels, weights


def rel_error(a, b, floor=1e-6):
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def gradcheck(seed=0, height=6, width=9, spec=PanSpec(), step=1e-3, probes=40):
    """Max relative error between analytic and numeric gradients per group.

    ``probes`` entries per group are drawn at random (seeded), always
    including the first and last entry; ``probes=None`` checks every entry.
    """
    img, kernels, weights = random_instance(seed, height, width, spec=spec)
    inputs = {"kernels": kernels, "weights": weights, "img": img}

    def loss(kw):
        out = blend_forward(kw["img"], kw["kernels"], kw["weights"], spec)
        return float(np.sum(out * out))

    out = blend_forward(img, kernels, weights, spec)
    gk, gw, gi = blend_backward(img, kernels, weights, spec, 2.0 * out)
    analytic = {"kernels": gk, "weights": gw, "img": gi}

    rng = np.random.default_rng(seed + 7919)
    report = {}
    for name in GROUPS:
        base = inputs[name]
        n = base.size
        if probes is None or probes >= n:
            idx = np.arange(n)
        else:
            idx = np.unique(np.concatenate([[0, n - 1], rng.choice(n, probes, replace=False)]))
        errs = []
        for flat in idx:
            pos = np.unravel_index(flat, base.shape)
            vals = []
            for sign in (1.0, -1.0):
                pert = base.copy()
                pert[pos] += sign * step
                vals.append(loss({**inputs, name: pert}))
            numeric = (vals[0] - vals[1]) / (2.0 * step)
            errs.append(rel_error(analytic[name][pos], numeric))
        report[name] = float(np.max(errs))
    return report
