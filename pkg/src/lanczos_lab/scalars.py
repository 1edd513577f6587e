"""Arithmetic regimes.

Three fixed precisions drive every computation in the package: binary32
(``LOW32``), binary64 (``WORK64``) and double-double (``EXT128``, ~31 decimal
digits, used as the "exact" regime).  Low-precision runs execute every
elementary operation natively in the target format rather than rounding
higher-precision results, so their rounding behaviour is that of a genuine
single/double run.
"""

from __future__ import annotations

import enum

import numpy as np

from ._dd import DD, as_dd

__all__ = [
    "Precision",
    "DD",
    "as_dd",
    "ext_add",
    "ext_sub",
    "ext_mul",
    "ext_div",
    "ext_sqrt",
    "round_to",
]


class Precision(enum.Enum):
    LOW32 = "low32"
    WORK64 = "work64"
    EXT128 = "ext128"

    @property
    def unit_roundoff(self) -> float:
        return _UNIT_ROUNDOFF[self]

    @property
    def dtype(self):
        """Storage dtype for vectors at this precision (EXT128 pairs use float64)."""
        return np.float32 if self is Precision.LOW32 else np.float64

    @classmethod
    def parse(cls, text: str) -> "Precision":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown precision {text!r}; expected one of "
                f"{[p.value for p in cls]}"
            ) from None


_UNIT_ROUNDOFF = {
    Precision.LOW32: 2.0 ** -24,
    Precision.WORK64: 2.0 ** -53,
    Precision.EXT128: 2.0 ** -105,
}


def ext_add(a, b) -> DD:
    return as_dd(a) + as_dd(b)


def ext_sub(a, b) -> DD:
    return as_dd(a) - as_dd(b)


def ext_mul(a, b) -> DD:
    return as_dd(a) * as_dd(b)


def ext_div(a, b) -> DD:
    return as_dd(a) / as_dd(b)


def ext_sqrt(a) -> DD:
    return as_dd(a).sqrt()


def _round_dd_to(x: DD, dtype):
    """Round-to-nearest-even from double-double to float32/float64.

    A first conversion of the hi word gives a candidate within one ulp of the
    correctly rounded result; comparing the three neighbouring candidates in
    exact dd arithmetic picks the nearest (even mantissa on ties).
    """
    hi = np.asarray(x.hi, dtype=np.float64)
    scalar = hi.ndim == 0
    hi = np.atleast_1d(hi)
    lo = np.atleast_1d(np.asarray(x.lo, dtype=np.float64))
    with np.errstate(over="ignore", invalid="ignore"):
        base = hi.astype(dtype)
        up = np.nextafter(base, np.inf, dtype=dtype)
        down = np.nextafter(base, -np.inf, dtype=dtype)
        out = base.copy()
        target = DD.of(hi, lo)
        best = abs(target - base.astype(np.float64))
        for cand in (down, up):
            err = abs(target - cand.astype(np.float64))
            better = err < best
            tie = (err == best) & (cand.view(_UINT[dtype]) % 2 == 0) & (
                out.view(_UINT[dtype]) % 2 == 1
            )
            take = np.asarray(better | tie)
            out = np.where(take, cand, out)
            bh = np.where(take, err.hi, best.hi)
            bl = np.where(take, err.lo, best.lo)
            best = DD.of(bh, bl)
        out = out.astype(dtype)
    if scalar:
        return dtype(out[0])
    return out


_UINT = {np.float32: np.uint32, np.float64: np.uint64}


def round_to(precision: Precision, x):
    """Round a value (float, ndarray or DD) to the target precision.

    Round-to-nearest-even at the target significand width.  Overflow (e.g. at
    LOW32) produces infinities which callers treat as a divergent run.
    """
    if precision is Precision.EXT128:
        return as_dd(x)
    x = as_dd(x)
    if precision is Precision.WORK64:
        # hi + lo is the correctly rounded binary64 value of a normalized pair
        out = np.asarray(x.hi, dtype=np.float64) + np.asarray(x.lo, dtype=np.float64)
        return out if out.ndim else float(out)
    return _round_dd_to(x, np.float32)
