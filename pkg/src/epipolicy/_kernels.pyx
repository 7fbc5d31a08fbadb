# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: fixed-step RK4 for the lockdown/vaccination SIR model
and summed Huber loss. Mirrors ``_kernels_py`` operation for operation."""

import numpy as np
cimport numpy as cnp

from libc.math cimport INFINITY, NAN, fabs

cnp.import_array()


cdef inline void _clamp(double* s, double* i, double* r, double n, int* nclamp) noexcept nogil:
    cdef double tot
    if s[0] >= 0.0 and i[0] >= 0.0 and r[0] >= 0.0:
        return
    nclamp[0] += 1
    if s[0] < 0.0:
        s[0] = 0.0
    if i[0] < 0.0:
        i[0] = 0.0
    r[0] = n - s[0] - i[0]
    if r[0] < 0.0:
        tot = s[0] + i[0]
        s[0] = s[0] * n / tot
        i[0] = n - s[0]
        r[0] = 0.0


def rk4_path(double s0, double i0, double r0, double n, double gamma,
             const double[::1] trans, const double[::1] nu):
    """Integrate one step per day; ``trans[t]`` is beta*(1 - s_t/100)."""
    cdef Py_ssize_t h = trans.shape[0]
    cdef Py_ssize_t t
    cdef double s = s0, i = i0, r = r0
    cdef double b, v, inv_n = 1.0 / n
    cdef double ks1, ki1, ks2, ki2, ks3, ki3, ks4, ki4
    cdef double f, si, ii, ds, di
    cdef int nclamp = 0
    out_arr = np.empty((h + 1, 3), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    out[0, 0] = s
    out[0, 1] = i
    out[0, 2] = r
    with nogil:
        for t in range(h):
            b = trans[t]
            v = nu[t]
            f = b * s * i * inv_n
            ks1 = -f - v * s
            ki1 = f - gamma * i
            si = s + 0.5 * ks1
            ii = i + 0.5 * ki1
            f = b * si * ii * inv_n
            ks2 = -f - v * si
            ki2 = f - gamma * ii
            si = s + 0.5 * ks2
            ii = i + 0.5 * ki2
            f = b * si * ii * inv_n
            ks3 = -f - v * si
            ki3 = f - gamma * ii
            si = s + ks3
            ii = i + ki3
            f = b * si * ii * inv_n
            ks4 = -f - v * si
            ki4 = f - gamma * ii
            ds = (ks1 + 2.0 * ks2 + 2.0 * ks3 + ks4) / 6.0
            di = (ki1 + 2.0 * ki2 + 2.0 * ki3 + ki4) / 6.0
            s = s + ds
            i = i + di
            r = r - ds - di
            _clamp(&s, &i, &r, n, &nclamp)
            out[t + 1, 0] = s
            out[t + 1, 1] = i
            out[t + 1, 2] = r
    return out_arr, nclamp


def huber_sum(const double[::1] y, const double[::1] f, double delta):
    cdef Py_ssize_t k, m = y.shape[0]
    cdef double d, acc = 0.0
    with nogil:
        for k in range(m):
            d = y[k] - f[k]
            if d < 0.0:
                d = -d
            if d <= delta:
                acc += 0.5 * d * d
            else:
                acc += delta * (d - 0.5 * delta)
    return acc


cdef double _huber(double d, double delta) noexcept nogil:
    if d < 0.0:
        d = -d
    if d <= delta:
        return 0.5 * d * d
    return delta * (d - 0.5 * delta)


cdef double _window_loss(double s, double i, double r, double n, double gamma,
                         const double[::1] trans, double v,
                         const double[::1] os, const double[::1] oi, const double[::1] orr,
                         double* end) noexcept nogil:
    cdef Py_ssize_t t, h = trans.shape[0]
    cdef double b, inv_n = 1.0 / n
    cdef double ks1, ki1, ks2, ki2, ks3, ki3, ks4, ki4
    cdef double f, si, ii, ds, di
    cdef double acc_s = _huber(os[0] - s, 1.0)
    cdef double acc_i = _huber(oi[0] - i, 1.0)
    cdef double acc_r = _huber(orr[0] - r, 1.0)
    cdef int nclamp = 0
    for t in range(h):
        b = trans[t]
        f = b * s * i * inv_n
        ks1 = -f - v * s
        ki1 = f - gamma * i
        si = s + 0.5 * ks1
        ii = i + 0.5 * ki1
        f = b * si * ii * inv_n
        ks2 = -f - v * si
        ki2 = f - gamma * ii
        si = s + 0.5 * ks2
        ii = i + 0.5 * ki2
        f = b * si * ii * inv_n
        ks3 = -f - v * si
        ki3 = f - gamma * ii
        si = s + ks3
        ii = i + ki3
        f = b * si * ii * inv_n
        ks4 = -f - v * si
        ki4 = f - gamma * ii
        ds = (ks1 + 2.0 * ks2 + 2.0 * ks3 + ks4) / 6.0
        di = (ki1 + 2.0 * ki2 + 2.0 * ki3 + ki4) / 6.0
        s = s + ds
        i = i + di
        r = r - ds - di
        _clamp(&s, &i, &r, n, &nclamp)
        acc_s += _huber(os[t + 1] - s, 1.0)
        acc_i += _huber(oi[t + 1] - i, 1.0)
        acc_r += _huber(orr[t + 1] - r, 1.0)
    end[0] = s
    end[1] = i
    end[2] = r
    f = acc_s + acc_i + acc_r
    if f != f:
        return INFINITY
    return f


cdef double _window_obj(double x, double nu_max, double s0, double i0, double r0, double n,
                        double gamma, const double[::1] trans, const double[::1] os,
                        const double[::1] oi, const double[::1] orr) noexcept nogil:
    cdef double end[3]
    if not (0.0 <= x <= nu_max):
        return INFINITY
    return _window_loss(s0, i0, r0, n, gamma, trans, x, os, oi, orr, end)


def fit_window_nu(double s0, double i0, double r0, double n, double gamma,
                  const double[::1] trans, const double[::1] os, const double[::1] oi,
                  const double[::1] orr, const double[::1] seeds, double nu_max,
                  double reflect, double expand, double contract, double shrink,
                  double rtol, double atol, double xrtol, double xatol, int max_iter,
                  double rel_step, double zero_step):
    """Multi-start 1-D Nelder-Mead for one window's constant vaccination rate.

    Returns ``(nu, loss, end_state)``; ``nu`` is NaN when no seed is feasible.
    """
    cdef Py_ssize_t k
    cdef double x0, x1, f0, f1, tmp, c, xr, fr, xe, fe, xc, fc
    cdef double best_x = NAN, best_f = INFINITY
    cdef int it
    cdef double end[3]
    with nogil:
        for k in range(seeds.shape[0]):
            x0 = seeds[k]
            f0 = _window_obj(x0, nu_max, s0, i0, r0, n, gamma, trans, os, oi, orr)
            if f0 == INFINITY:
                continue
            x1 = x0 + (rel_step * x0 if x0 != 0.0 else zero_step)
            f1 = _window_obj(x1, nu_max, s0, i0, r0, n, gamma, trans, os, oi, orr)
            it = 0
            while True:
                if f1 < f0:
                    tmp = x0; x0 = x1; x1 = tmp
                    tmp = f0; f0 = f1; f1 = tmp
                if f1 - f0 <= rtol * fabs(f0) + atol and fabs(x1 - x0) <= xrtol * fabs(x0) + xatol:
                    break
                if it >= max_iter:
                    break
                it += 1
                c = x0
                xr = c + reflect * (c - x1)
                fr = _window_obj(xr, nu_max, s0, i0, r0, n, gamma, trans, os, oi, orr)
                if fr < f0:
                    xe = c + expand * (xr - c)
                    fe = _window_obj(xe, nu_max, s0, i0, r0, n, gamma, trans, os, oi, orr)
                    if fe < fr:
                        x1 = xe; f1 = fe
                    else:
                        x1 = xr; f1 = fr
                    continue
                if fr < f1:
                    xc = c + contract * (xr - c)
                    fc = _window_obj(xc, nu_max, s0, i0, r0, n, gamma, trans, os, oi, orr)
                    if fc <= fr:
                        x1 = xc; f1 = fc
                        continue
                else:
                    xc = c + contract * (x1 - c)
                    fc = _window_obj(xc, nu_max, s0, i0, r0, n, gamma, trans, os, oi, orr)
                    if fc < f1:
                        x1 = xc; f1 = fc
                        continue
                x1 = x0 + shrink * (x1 - x0)
                f1 = _window_obj(x1, nu_max, s0, i0, r0, n, gamma, trans, os, oi, orr)
            if f0 < best_f:
                best_f = f0
                best_x = x0
        if best_x == best_x:
            _window_loss(s0, i0, r0, n, gamma, trans, best_x, os, oi, orr, end)
        else:
            end[0] = s0
            end[1] = i0
            end[2] = r0
    return best_x, best_f, (end[0], end[1], end[2])
