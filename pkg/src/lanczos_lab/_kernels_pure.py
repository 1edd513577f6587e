"""Pure-numpy fallback for the compiled double-double kernels.

Same call surface and rounding behaviour as ``_ddcore``; used when the
extension is unavailable or when LANCZOS_LAB_BACKEND=pure.  Vector kernels are
numpy-vectorized; the QL eigensolver runs on python scalar pairs and is the
slow path (the benchmark module quantifies the gap).
"""

from __future__ import annotations

import numpy as np

from . import _dd

_DD_EPS = 4.93038065763132e-32  # 2**-104
_BLOCK = 256


def dot_dd(xh, xl, yh, yl):
    ph, pl = _dd.mul_(xh, xl, yh, yl)
    h, l = _dd.npsum_(ph, pl)
    return float(h), float(l)


def matvec_f64_dd(A, xh, xl):
    n = A.shape[0]
    yh = np.empty(n)
    yl = np.empty(n)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        blk = A[start:stop]
        ph, pl = _dd.two_prod(blk, xh[None, :])
        pl = pl + blk * xl[None, :]
        ph, pl = _dd.quick_two_sum(ph, pl)
        h, l = _dd.npsum_(ph, pl, axis=1)
        yh[start:stop] = h
        yl[start:stop] = l
    return yh, yl


def matvec_dd_dd(Qh, Ql, ch, cl):
    ph, pl = _dd.mul_(Qh, Ql, ch[None, :], cl[None, :])
    return _dd.npsum_(ph, pl, axis=1)


def gramt_dd(Qh, Ql, xh, xl):
    ph, pl = _dd.mul_(Qh, Ql, xh[:, None], xl[:, None])
    return _dd.npsum_(ph, pl, axis=0)


def _t(hi, lo=0.0):
    return (hi, lo)


def _add(x, y):
    h, l = _dd.add_(x[0], x[1], y[0], y[1])
    return (h, l)


def _sub(x, y):
    h, l = _dd.sub_(x[0], x[1], y[0], y[1])
    return (h, l)


def _mul(x, y):
    h, l = _dd.mul_(x[0], x[1], y[0], y[1])
    return (h, l)


def _mul_d(a, y):
    h, l = _dd.mul_d(y[0], y[1], a)
    return (h, l)


def _div(x, y):
    h, l = _dd.div_(x[0], x[1], y[0], y[1])
    return (h, l)


def _sqrt(x):
    h, l = _dd.sqrt_(x[0], x[1])
    return (float(h), float(l))


def _hypot(x, y):
    return _sqrt(_add(_mul(x, x), _mul(y, y)))


def ql_implicit_dd(dh, dl, eh, el, zh, zl, max_iter):
    k = dh.shape[0]
    nrows = zh.shape[0]
    if k == 1:
        return 0
    one = (1.0, 0.0)
    for l in range(k):
        it = 0
        while True:
            m = l
            while m < k - 1:
                if abs(eh[m]) + abs(el[m]) <= _DD_EPS * (
                    abs(dh[m]) + abs(dh[m + 1])
                ):
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                return l + 1
            g = _div(_sub(_t(dh[l + 1], dl[l + 1]), _t(dh[l], dl[l])),
                     _mul_d(2.0, _t(eh[l], el[l])))
            r = _hypot(g, one)
            if g[0] < 0.0:
                r = (-r[0], -r[1])
            g = _add(_sub(_t(dh[m], dl[m]), _t(dh[l], dl[l])),
                     _div(_t(eh[l], el[l]), _add(g, r)))
            s = one
            c = one
            p = (0.0, 0.0)
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = _mul(s, _t(eh[i], el[i]))
                b = _mul(c, _t(eh[i], el[i]))
                r = _hypot(f, g)
                eh[i + 1], el[i + 1] = r
                if r[0] == 0.0 and r[1] == 0.0:
                    dh[i + 1], dl[i + 1] = _sub(_t(dh[i + 1], dl[i + 1]), p)
                    eh[m] = 0.0
                    el[m] = 0.0
                    underflow = True
                    break
                s = _div(f, r)
                c = _div(g, r)
                g = _sub(_t(dh[i + 1], dl[i + 1]), p)
                r = _add(_mul(_sub(_t(dh[i], dl[i]), g), s),
                         _mul(_mul_d(2.0, c), b))
                p = _mul(s, r)
                dh[i + 1], dl[i + 1] = _add(g, p)
                g = _sub(_mul(c, r), b)
                for rr in range(nrows):
                    zi1 = _t(zh[rr, i + 1], zl[rr, i + 1])
                    zi = _t(zh[rr, i], zl[rr, i])
                    zh[rr, i + 1], zl[rr, i + 1] = _add(_mul(s, zi), _mul(c, zi1))
                    zh[rr, i], zl[rr, i] = _sub(_mul(c, zi), _mul(s, zi1))
            if not underflow:
                dh[l], dl[l] = _sub(_t(dh[l], dl[l]), p)
                eh[l] = g[0]
                el[l] = g[1]
                eh[m] = 0.0
                el[m] = 0.0
    return 0


def backend_name():
    return "pure"
