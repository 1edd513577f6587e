"""Double-double building blocks.

A double-double number is an unevaluated sum hi + lo of two binary64 values
with |lo| <= ulp(hi)/2, giving an effective 106-bit significand.  All
primitives below are error-free-transformation based (Dekker/Knuth) and work
elementwise on numpy arrays or python floats.  They are the substrate for the
extended ("exact") arithmetic regime; hot loops are reimplemented in the
compiled core with identical semantics.
"""

from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    """s + e == a + b exactly, s = fl(a + b)."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def quick_two_sum(a, b):
    """two_sum assuming |a| >= |b|."""
    s = a + b
    e = b - (s - a)
    return s, e


def two_prod(a, b):
    """p + e == a * b exactly (Dekker split; no FMA dependency)."""
    p = a * b
    ca = _SPLITTER * a
    ahi = ca - (ca - a)
    alo = a - ahi
    cb = _SPLITTER * b
    bhi = cb - (cb - b)
    blo = b - bhi
    e = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, e


def add_(xh, xl, yh, yl):
    """Accurate double-double addition (error <= 2 ulp of 2^-105)."""
    sh, sl = two_sum(xh, yh)
    th, tl = two_sum(xl, yl)
    sl = sl + th
    sh, sl = quick_two_sum(sh, sl)
    sl = sl + tl
    return quick_two_sum(sh, sl)


def add_d(xh, xl, y):
    sh, sl = two_sum(xh, y)
    sl = sl + xl
    return quick_two_sum(sh, sl)


def sub_(xh, xl, yh, yl):
    return add_(xh, xl, -yh, -yl)


def mul_(xh, xl, yh, yl):
    ph, pl = two_prod(xh, yh)
    pl = pl + (xh * yl + xl * yh)
    return quick_two_sum(ph, pl)


def mul_d(xh, xl, y):
    ph, pl = two_prod(xh, y)
    pl = pl + xl * y
    return quick_two_sum(ph, pl)


def div_(xh, xl, yh, yl):
    q1 = xh / yh
    rh, rl = mul_d(yh, yl, q1)
    rh, rl = sub_(xh, xl, rh, rl)
    q2 = rh / yh
    sh, sl = mul_d(yh, yl, q2)
    rh, rl = sub_(rh, rl, sh, sl)
    q3 = rh / yh
    qh, ql = quick_two_sum(q1, q2)
    return add_d(qh, ql, q3)


def sqrt_(xh, xl):
    """Newton step from the binary64 root; accurate to ~2 ulp.  Negative
    input propagates NaN (callers treat non-finite as an invalid value)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.sqrt(xh)
        ph, pl = two_prod(y, y)
        rh, rl = sub_(xh, xl, ph, pl)
        corr = np.where(y != 0.0, rh / (2.0 * y), 0.0 * y)
        return quick_two_sum(y, corr)


def npsum_(hi, lo, axis=0):
    """Pairwise double-double reduction along ``axis``."""
    hi = np.asarray(hi, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.moveaxis(hi, axis, 0)
    lo = np.moveaxis(lo, axis, 0)
    while hi.shape[0] > 1:
        m = hi.shape[0]
        half = m // 2
        ah, al = hi[:half], lo[:half]
        bh, bl = hi[half : 2 * half], lo[half : 2 * half]
        sh, sl = add_(ah, al, bh, bl)
        if m % 2:
            sh0, sl0 = add_(sh[:1], sl[:1], hi[-1:], lo[-1:])
            sh = np.concatenate([sh0, sh[1:]])
            sl = np.concatenate([sl0, sl[1:]])
        hi, lo = sh, sl
    return hi[0], lo[0]


def _coerce(other):
    if isinstance(other, DD):
        return other.hi, other.lo
    arr = np.asarray(other, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr[()]
    return arr, np.zeros_like(arr) if isinstance(arr, np.ndarray) else 0.0


class DD:
    """Double-double scalar or ndarray; value = hi + lo exactly."""

    __slots__ = ("hi", "lo")

    def __init__(self, hi, lo=None):
        hi = np.asarray(hi, dtype=np.float64)
        if hi.ndim == 0:
            hi = float(hi)
            lo = 0.0 if lo is None else float(lo)
        else:
            lo = np.zeros_like(hi) if lo is None else np.asarray(lo, dtype=np.float64)
        self.hi = hi
        self.lo = lo

    # -- construction -------------------------------------------------
    @classmethod
    def of(cls, hi, lo):
        """Trusted constructor: (hi, lo) already normalized."""
        obj = cls.__new__(cls)
        obj.hi = hi
        obj.lo = lo
        return obj

    @classmethod
    def zeros(cls, shape):
        return cls.of(np.zeros(shape), np.zeros(shape))

    @classmethod
    def ones(cls, shape):
        return cls.of(np.ones(shape), np.zeros(shape))

    # -- basic protocol ------------------------------------------------
    @property
    def shape(self):
        return np.shape(self.hi)

    @property
    def ndim(self):
        return np.ndim(self.hi)

    def __len__(self):
        return len(self.hi)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, idx):
        hi = self.hi[idx]
        lo = self.lo[idx]
        if np.ndim(hi) == 0:
            return DD.of(float(hi), float(lo))
        return DD.of(hi, lo)

    def __setitem__(self, idx, value):
        vh, vl = _coerce(value)
        self.hi[idx] = vh
        self.lo[idx] = vl

    def copy(self):
        if isinstance(self.hi, float):
            return DD.of(self.hi, self.lo)
        return DD.of(self.hi.copy(), self.lo.copy())

    def to_float(self):
        return self.hi + self.lo

    def __float__(self):
        return float(self.hi + self.lo)

    def __repr__(self):
        return f"DD({self.hi!r}, {self.lo!r})"

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        oh, ol = _coerce(other)
        return DD.of(*add_(self.hi, self.lo, oh, ol))

    __radd__ = __add__

    def __sub__(self, other):
        oh, ol = _coerce(other)
        return DD.of(*sub_(self.hi, self.lo, oh, ol))

    def __rsub__(self, other):
        oh, ol = _coerce(other)
        return DD.of(*sub_(oh, ol, self.hi, self.lo))

    def __mul__(self, other):
        oh, ol = _coerce(other)
        return DD.of(*mul_(self.hi, self.lo, oh, ol))

    __rmul__ = __mul__

    def __truediv__(self, other):
        oh, ol = _coerce(other)
        return DD.of(*div_(self.hi, self.lo, oh, ol))

    def __rtruediv__(self, other):
        oh, ol = _coerce(other)
        return DD.of(*div_(oh, ol, self.hi, self.lo))

    def __neg__(self):
        return DD.of(-self.hi, -self.lo)

    def __abs__(self):
        neg = self.hi < 0
        if isinstance(self.hi, float):
            return -self if neg else self.copy()
        return DD.of(np.where(neg, -self.hi, self.hi), np.where(neg, -self.lo, self.lo))

    def sqrt(self):
        return DD.of(*sqrt_(self.hi, self.lo))

    def sum(self, axis=0):
        h, l = npsum_(self.hi, self.lo, axis=axis)
        if np.ndim(h) == 0:
            return DD.of(float(h), float(l))
        return DD.of(h, l)

    # -- comparisons (valid because operands are normalized) -----------
    def _cmp(self, other, op):
        oh, ol = _coerce(other)
        return op(self.hi, oh) | ((self.hi == oh) & op(self.lo, ol))

    def __lt__(self, other):
        return self._cmp(other, np.less)

    def __gt__(self, other):
        return self._cmp(other, np.greater)

    def __le__(self, other):
        oh, ol = _coerce(other)
        return np.less(self.hi, oh) | ((self.hi == oh) & np.less_equal(self.lo, ol))

    def __ge__(self, other):
        oh, ol = _coerce(other)
        return np.greater(self.hi, oh) | ((self.hi == oh) & np.greater_equal(self.lo, ol))

    def __eq__(self, other):
        oh, ol = _coerce(other)
        return (self.hi == oh) & (self.lo == ol)

    def __ne__(self, other):
        return ~self.__eq__(other)

    def __hash__(self):
        if isinstance(self.hi, float):
            return hash((self.hi, self.lo))
        raise TypeError("unhashable: DD array")

    def isfinite(self):
        return np.all(np.isfinite(self.hi)) and np.all(np.isfinite(self.lo))


def dd_concatenate(parts):
    return DD.of(
        np.concatenate([np.atleast_1d(p.hi) for p in parts]),
        np.concatenate([np.atleast_1d(p.lo) for p in parts]),
    )


def dd_stack(parts, axis=0):
    return DD.of(
        np.stack([p.hi for p in parts], axis=axis),
        np.stack([p.lo for p in parts], axis=axis),
    )


def as_dd(x):
    """Lift floats/arrays (exactly) or pass DD through."""
    if isinstance(x, DD):
        return x
    return DD(x)
