"""Compiled inner loops for the t-convolution (one row block per call).

Each call handles output rows ``y0:y1`` for every dilation in ``dils``,
blending with ``weights``. Loops run in a fixed order, so a block's result
is bit-reproducible; the caller decides how blocks map onto threads.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _lerp_index(t, n):
    if t < 0.0:
        t = 0.0
    elif t > n - 1.0:
        t = n - 1.0
    i0 = int(math.floor(t))
    i1 = i0 + 1
    if i1 > n - 1:
        i1 = n - 1
    return i0, i1, t - i0


@njit(cache=True, nogil=True)
def tap_coord(k, x, y, d, n_short, n_long, n_up, n_down):
    """Axis (0 = horizontal, 1 = vertical) and real coordinate of tap ``k``."""
    ad = abs(d)
    if k <= n_short:
        return 0, x - k * d
    k -= n_short
    if k <= n_long:
        return 0, x + k * d
    k -= n_long
    if k <= n_up:
        return 1, y - k * ad
    k -= n_up
    return 1, y + k * ad


@njit(cache=True, nogil=True)
def forward_block(img, kern, weights, dils, n_short, n_long, n_up, n_down, y0, y1):
    h, w, c = img.shape
    n_k = kern.shape[2]
    out = np.zeros((y1 - y0, w, c))
    acc = np.zeros(c)
    for y in range(y0, y1):
        for x in range(w):
            for i in range(dils.shape[0]):
                d = dils[i]
                for ch in range(c):
                    acc[ch] = kern[y, x, 0] * img[y, x, ch]
                for k in range(1, n_k):
                    t_k = kern[y, x, k]
                    axis, t = tap_coord(k, x, y, d, n_short, n_long, n_up, n_down)
                    if axis == 0:
                        i0, i1, f = _lerp_index(t, w)
                        for ch in range(c):
                            acc[ch] += t_k * ((1.0 - f) * img[y, i0, ch] + f * img[y, i1, ch])
                    else:
                        i0, i1, f = _lerp_index(t, h)
                        for ch in range(c):
                            acc[ch] += t_k * ((1.0 - f) * img[i0, x, ch] + f * img[i1, x, ch])
                wi = weights[y, x, i]
                for ch in range(c):
                    out[y - y0, x, ch] += wi * acc[ch]
    return out


@njit(cache=True, nogil=True)
def backward_block(img, kern, weights, dils, grad_out,
                   n_short, n_long, n_up, n_down, y0, y1, lo, hi):
    """Returns (grad_kern rows, grad_weights rows, grad_img rows lo:hi)."""
    h, w, c = img.shape
    n_k = kern.shape[2]
    n_d = dils.shape[0]
    gk = np.zeros((y1 - y0, w, n_k))
    gw = np.zeros((y1 - y0, w, n_d))
    gi = np.zeros((hi - lo, w, c))
    for y in range(y0, y1):
        r = y - y0
        for x in range(w):
            for i in range(n_d):
                d = dils[i]
                wi = weights[y, x, i]
                gs = 0.0
                for ch in range(c):
                    gs += grad_out[y, x, ch] * img[y, x, ch]
                gk[r, x, 0] += wi * gs
                gw[r, x, i] += kern[y, x, 0] * gs
                scale = wi * kern[y, x, 0]
                for ch in range(c):
                    gi[y - lo, x, ch] += scale * grad_out[y, x, ch]
                for k in range(1, n_k):
                    t_k = kern[y, x, k]
                    scale = wi * t_k
                    axis, t = tap_coord(k, x, y, d, n_short, n_long, n_up, n_down)
                    gs = 0.0
                    if axis == 0:
                        i0, i1, f = _lerp_index(t, w)
                        for ch in range(c):
                            g = grad_out[y, x, ch]
                            gs += g * ((1.0 - f) * img[y, i0, ch] + f * img[y, i1, ch])
                            gi[y - lo, i0, ch] += (1.0 - f) * scale * g
                            gi[y - lo, i1, ch] += f * scale * g
                    else:
                        i0, i1, f = _lerp_index(t, h)
                        for ch in range(c):
                            g = grad_out[y, x, ch]
                            gs += g * ((1.0 - f) * img[i0, x, ch] + f * img[i1, x, ch])
                            gi[i0 - lo, x, ch] += (1.0 - f) * scale * g
                            gi[i1 - lo, x, ch] += f * scale * g
                    gk[r, x, k] += wi * gs
                    gw[r, x, i] += t_k * gs
    return gk, gw, gi
