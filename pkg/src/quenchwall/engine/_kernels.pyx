# cython: language_level=3
"""Compiled transfer kernel for Gaussian steps on a uniform lattice.

Gaussian weights are generated by the multiplicative recurrence
w(j+1) = w(j) * r(j), r(j+1) = r(j) * exp(-2h), and the bridge factors by a
geometric recurrence, so each (source, target) pair costs a few multiplies.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor, ceil, fabs

cnp.import_array()

DEF MODE_FREE = 0
DEF MODE_BRIDGE = 1
DEF MODE_CELL = 2


def gauss_step(const double[::1] m, double pos0, double dx, double a, double shift,
               double sd, double nsig, double b0, double b1, double bvar, int mode,
               double out_pos0, Py_ssize_t n_out):
    """Propagate point masses ``m`` at ``pos0 + i dx`` one Gaussian step.

    The target of a mass at x is N(a x + shift, sd**2), sampled on the
    output lattice ``out_pos0 + j dx`` and normalised over the band of
    ``nsig`` standard deviations.  ``mode`` selects the survival factor:
    0 none, 1 Brownian-bridge non-crossing of the linear barrier b0 -> b1
    with variance ``bvar``, 2 fraction of the target cell above b1.
    """
    cdef Py_ssize_t n = m.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(n_out)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t width = <Py_ssize_t>(2.0 * nsig * sd / dx) + 4
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf_arr = np.empty(width)
    cdef double[::1] buf = buf_arr
    cdef double h = dx * dx / (2.0 * sd * sd)
    cdef double q = exp(-2.0 * h)
    cdef double half = nsig * sd / dx
    cdef Py_ssize_t i, j, jlo, jhi, jc, k, jstart
    cdef double mi, x, c, d, w, r, z, u, v, e, rho, f, mass
    for i in range(n):
        mass = m[i]
        if mass == 0.0:
            continue
        x = pos0 + i * dx
        u = x - b0
        if mode == MODE_BRIDGE and u <= 0.0:
            continue
        c = (a * x + shift - out_pos0) / dx
        jlo = <Py_ssize_t>ceil(c - half)
        jhi = <Py_ssize_t>floor(c + half)
        if jhi - jlo + 1 > width:
            jhi = jlo + width - 1
        jc = <Py_ssize_t>floor(c + 0.5)
        if jc < jlo:
            jc = jlo
        if jc > jhi:
            jc = jhi
        # centre-out Gaussian recurrence
        d = jc - c
        w = exp(-h * d * d)
        buf[jc - jlo] = w
        z = w
        r = exp(-h * (2.0 * d + 1.0))
        for j in range(jc + 1, jhi + 1):
            w = w * r
            r = r * q
            buf[j - jlo] = w
            z += w
        w = buf[jc - jlo]
        r = exp(-h * (1.0 - 2.0 * d))
        for j in range(jc - 1, jlo - 1, -1):
            w = w * r
            r = r * q
            buf[j - jlo] = w
            z += w
        mass = mass / z
        if mode == MODE_BRIDGE:
            # first target strictly above the barrier
            jstart = <Py_ssize_t>floor((b1 - out_pos0) / dx) + 1
            while jstart <= jhi and out_pos0 + jstart * dx - b1 <= 0.0:
                jstart += 1
            while jstart - 1 >= jlo and out_pos0 + (jstart - 1) * dx - b1 > 0.0:
                jstart -= 1
            if jstart < jlo:
                jstart = jlo
            v = out_pos0 + jstart * dx - b1
            e = exp(-2.0 * u * v / bvar)
            rho = exp(-2.0 * u * dx / bvar)
            for j in range(jstart, jhi + 1):
                k = j
                if k < 0 or k >= n_out:
                    if e > 0.0:
                        e = e * rho
                    continue
                out[k] += mass * buf[j - jlo] * (1.0 - e)
                if e > 1e-300:
                    e = e * rho
                else:
                    e = 0.0
        elif mode == MODE_CELL:
            for j in range(jlo, jhi + 1):
                if j < 0 or j >= n_out:
                    continue
                v = out_pos0 + j * dx - b1
                f = v / dx + 0.5
                if f <= 0.0:
                    continue
                if f > 1.0:
                    f = 1.0
                out[j] += mass * buf[j - jlo] * f
        else:
            for j in range(jlo, jhi + 1):
                if j < 0 or j >= n_out:
                    continue
                out[j] += mass * buf[j - jlo]
    return out_arr
