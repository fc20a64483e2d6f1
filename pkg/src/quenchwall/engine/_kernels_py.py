"""Pure numpy version of the compiled transfer kernel (same signature)."""
from __future__ import annotations

import numpy as np

MODE_FREE, MODE_BRIDGE, MODE_CELL = 0, 1, 2
_CHUNK = 4096


def gauss_step(m, pos0, dx, a, shift, sd, nsig, b0, b1, bvar, mode, out_pos0, n_out):
    m = np.asarray(m, dtype=float)
    out = np.zeros(n_out)
    h = dx * dx / (2.0 * sd * sd)
    half = nsig * sd / dx
    width = int(2.0 * nsig * sd / dx) + 4
    idx = np.nonzero(m)[0]
    x_all = pos0 + idx * dx
    if mode == MODE_BRIDGE:
        keep = x_all - b0 > 0
        idx, x_all = idx[keep], x_all[keep]
    for s in range(0, idx.size, _CHUNK):
        ii = idx[s:s + _CHUNK]
        x = x_all[s:s + _CHUNK]
        c = (a * x + shift - out_pos0) / dx
        jlo = np.ceil(c - half).astype(np.int64)
        jhi = np.minimum(np.floor(c + half).astype(np.int64), jlo + width - 1)
        off = np.arange(width)
        j = jlo[:, None] + off[None, :]
        valid = j <= jhi[:, None]
        d = j - c[:, None]
        w = np.where(valid, np.exp(-h * d * d), 0.0)
        w *= (m[ii] / w.sum(axis=1))[:, None]
        if mode == MODE_BRIDGE:
            u = (x - b0)[:, None]
            v = out_pos0 + j * dx - b1
            fac = np.where(v > 0, -np.expm1(-2.0 * u * np.maximum(v, 0.0) / bvar), 0.0)
            w *= fac
        elif mode == MODE_CELL:
            v = out_pos0 + j * dx - b1
            w *= np.clip(v / dx + 0.5, 0.0, 1.0)
        inside = valid & (j >= 0) & (j < n_out)
        out += np.bincount(j[inside], weights=w[inside], minlength=n_out)[:n_out]
    return out


def lattice_step(m, offsets, probs, k_min, n_out):
    """Convolve ``m`` with integer taps; output index = source + offset - k_min."""
    out = np.zeros(n_out)
    n = len(m)
    for off, p in zip(offsets, probs):
        start = int(off) - k_min
        out[start:start + n] += p * m
    return out
