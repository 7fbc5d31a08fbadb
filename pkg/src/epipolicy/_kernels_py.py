"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Used when the extension is not built. The arithmetic order matches the
Cython source so both backends agree to rounding.
"""

import math

import numpy as np


def _clamp(s, i, r, n):
    if s >= 0.0 and i >= 0.0 and r >= 0.0:
        return s, i, r, 0
    s = max(s, 0.0)
    i = max(i, 0.0)
    r = n - s - i
    if r < 0.0:
        tot = s + i
        s = s * n / tot
        i = n - s
        r = 0.0
    return s, i, r, 1


def rk4_path(s0, i0, r0, n, gamma, trans, nu):
    h = len(trans)
    out = np.empty((h + 1, 3), dtype=np.float64)
    s, i, r = float(s0), float(i0), float(r0)
    inv_n = 1.0 / n
    out[0] = (s, i, r)
    nclamp = 0
    trans = trans.tolist()
    nu = nu.tolist()
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
        s, i, r, c = _clamp(s, i, r, n)
        nclamp += c
        out[t + 1, 0] = s
        out[t + 1, 1] = i
        out[t + 1, 2] = r
    return out, nclamp


def huber_sum(y, f, delta):
    acc = 0.0
    for a, b in zip(y.tolist(), f.tolist()):
        d = abs(a - b)
        if d <= delta:
            acc += 0.5 * d * d
        else:
            acc += delta * (d - 0.5 * delta)
    return acc


def _huber(d, delta):
    d = abs(d)
    if d <= delta:
        return 0.5 * d * d
    return delta * (d - 0.5 * delta)


def _window_loss(s, i, r, n, gamma, trans, v, os, oi, orr):
    inv_n = 1.0 / n
    acc_s = _huber(os[0] - s, 1.0)
    acc_i = _huber(oi[0] - i, 1.0)
    acc_r = _huber(orr[0] - r, 1.0)
    for t, b in enumerate(trans):
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
        s, i, r, _ = _clamp(s, i, r, n)
        acc_s += _huber(os[t + 1] - s, 1.0)
        acc_i += _huber(oi[t + 1] - i, 1.0)
        acc_r += _huber(orr[t + 1] - r, 1.0)
    f = acc_s + acc_i + acc_r
    return (math.inf if f != f else f), (s, i, r)


def fit_window_nu(s0, i0, r0, n, gamma, trans, os, oi, orr, seeds, nu_max,
                  reflect, expand, contract, shrink, rtol, atol, xrtol, xatol, max_iter,
                  rel_step, zero_step):
    trans, os, oi, orr = trans.tolist(), os.tolist(), oi.tolist(), orr.tolist()

    def obj(x):
        if not 0.0 <= x <= nu_max:
            return math.inf
        return _window_loss(s0, i0, r0, n, gamma, trans, x, os, oi, orr)[0]

    best_x, best_f = math.nan, math.inf
    for x0 in seeds.tolist():
        f0 = obj(x0)
        if f0 == math.inf:
            continue
        x1 = x0 + (rel_step * x0 if x0 != 0.0 else zero_step)
        f1 = obj(x1)
        it = 0
        while True:
            if f1 < f0:
                x0, x1, f0, f1 = x1, x0, f1, f0
            if f1 - f0 <= rtol * abs(f0) + atol and abs(x1 - x0) <= xrtol * abs(x0) + xatol:
                break
            if it >= max_iter:
                break
            it += 1
            c = x0
            xr = c + reflect * (c - x1)
            fr = obj(xr)
            if fr < f0:
                xe = c + expand * (xr - c)
                fe = obj(xe)
                x1, f1 = (xe, fe) if fe < fr else (xr, fr)
                continue
            if fr < f1:
                xc = c + contract * (xr - c)
                fc = obj(xc)
                if fc <= fr:
                    x1, f1 = xc, fc
                    continue
            else:
                xc = c + contract * (x1 - c)
                fc = obj(xc)
                if fc < f1:
                    x1, f1 = xc, fc
                    continue
            x1 = x0 + shrink * (x1 - x0)
            f1 = obj(x1)
        if f0 < best_f:
            best_x, best_f = x0, f0
    if best_x == best_x:
        end = _window_loss(s0, i0, r0, n, gamma, trans, best_x, os, oi, orr)[1]
    else:
        end = (s0, i0, r0)
    return best_x, best_f, end
