"""Kernel backend selection: compiled extension if importable, numpy fallback
otherwise.  LANCZOS_LAB_BACKEND={compiled,pure} forces the choice."""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_pure
from ._dd import DD

_choice = os.environ.get("LANCZOS_LAB_BACKEND", "").strip().lower()

if _choice == "pure":
    _impl = _kernels_pure
else:
    try:
        from . import _ddcore as _impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "LANCZOS_LAB_BACKEND=compiled but lanczos_lab._ddcore is not built"
            )
        _impl = _kernels_pure

BACKEND = _impl.backend_name()


def _vec(x: DD):
    hi = np.ascontiguousarray(np.atleast_1d(x.hi), dtype=np.float64)
    lo = np.ascontiguousarray(np.atleast_1d(x.lo), dtype=np.float64)
    return hi, lo


def dot(x: DD, y: DD) -> DD:
    xh, xl = _vec(x)
    yh, yl = _vec(y)
    h, l = _impl.dot_dd(xh, xl, yh, yl)
    return DD.of(h, l)


def norm(x: DD) -> DD:
    return dot(x, x).sqrt()


def matvec(A: np.ndarray, x: DD) -> DD:
    """A @ x for binary64 A and dd x."""
    xh, xl = _vec(x)
    A = np.ascontiguousarray(A, dtype=np.float64)
    h, l = _impl.matvec_f64_dd(A, xh, xl)
    return DD.of(h, l)


def matvec_dd(Q: DD, c: DD) -> DD:
    """Q @ c for dd Q (n, k) and dd c (k)."""
    ch, cl = _vec(c)
    Qh = np.ascontiguousarray(Q.hi)
    Ql = np.ascontiguousarray(Q.lo)
    h, l = _impl.matvec_dd_dd(Qh, Ql, ch, cl)
    return DD.of(h, l)


def gramt(Q: DD, x: DD) -> DD:
    """Q.T @ x for dd Q (n, k) and dd x (n)."""
    xh, xl = _vec(x)
    Qh = np.ascontiguousarray(Q.hi)
    Ql = np.ascontiguousarray(Q.lo)
    h, l = _impl.gramt_dd(Qh, Ql, xh, xl)
    return DD.of(h, l)


def ql_eigen(alphas: DD, betas: DD, rows: DD, max_iter: int = 50):
    """Eigenvalues of the symmetric tridiagonal (alphas, betas) plus the
    accumulated action of the eigenvector matrix on the given row block.

    Returns (values: DD (k,), rows_out: DD (m, k)); unsorted.
    Raises ArithmeticError on non-convergence, naming the offending index.
    """
    k = len(np.atleast_1d(alphas.hi))
    dh = np.array(np.atleast_1d(alphas.hi), dtype=np.float64)
    dl = np.array(np.atleast_1d(alphas.lo), dtype=np.float64)
    eh = np.zeros(k)
    el = np.zeros(k)
    if k > 1:
        eh[: k - 1] = np.atleast_1d(betas.hi)[: k - 1]
        el[: k - 1] = np.atleast_1d(betas.lo)[: k - 1]
    zh = np.array(np.atleast_2d(rows.hi), dtype=np.float64)
    zl = np.array(np.atleast_2d(rows.lo), dtype=np.float64)
    err = _impl.ql_implicit_dd(dh, dl, eh, el, zh, zl, max_iter)
    if err:
        raise ArithmeticError(
            f"tridiagonal QL failed to converge for eigenvalue index {err - 1}"
        )
    return DD.of(dh, dl), DD.of(zh, zl)
