"""Eigensolvers and matrix functions.

Tridiagonal eigenproblems run in extended (double-double) precision through
the in-repo implicit-shift QL kernel, accumulating only the first eigenvector
components needed for quadrature weights.  Dense symmetric problems at desk
scale go through LAPACK at binary64; a Householder reduction in extended
precision is available for small matrices where quadrature-grade accuracy of
the full spectral measure is required.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _backend
from ._dd import DD, as_dd

_DENSE_LIMIT = 5000


class JacobiMatrix:
    """Symmetric tridiagonal recurrence data: diagonal alphas (k), off-diagonal
    betas (k-1).  Betas must be strictly positive; a zero beta marks
    exact-arithmetic termination and truncates the matrix there.
    """

    __slots__ = ("alphas", "betas")

    def __init__(self, alphas, betas):
        alphas = as_dd(alphas)
        betas = as_dd(betas)
        a_hi = np.atleast_1d(alphas.hi).astype(np.float64)
        a_lo = np.atleast_1d(alphas.lo).astype(np.float64)
        b_hi = np.atleast_1d(betas.hi).astype(np.float64)
        b_lo = np.atleast_1d(betas.lo).astype(np.float64)
        if b_hi.shape[0] not in (max(a_hi.shape[0] - 1, 0),):
            raise ValueError(
                f"betas must have length {a_hi.shape[0] - 1}, got {b_hi.shape[0]}"
            )
        if np.any(b_hi < 0) or np.any((b_hi == 0) & (b_lo < 0)):
            raise ValueError("negative off-diagonal entry in Jacobi matrix")
        zero = np.nonzero(b_hi == 0)[0]
        if zero.size:
            m = int(zero[0]) + 1
            a_hi, a_lo = a_hi[:m], a_lo[:m]
            b_hi, b_lo = b_hi[: m - 1], b_lo[: m - 1]
        self.alphas = DD.of(a_hi, a_lo)
        self.betas = DD.of(b_hi, b_lo)

    def __len__(self):
        return len(self.alphas)

    def truncated(self, m: int) -> "JacobiMatrix":
        return JacobiMatrix(self.alphas[:m], self.betas[: m - 1])

    def affine(self, scale, shift) -> "JacobiMatrix":
        """Jacobi matrix of the pushforward under x -> scale*x + shift."""
        scale = as_dd(scale)
        return JacobiMatrix(self.alphas * scale + shift, self.betas * scale)

    def dense(self) -> np.ndarray:
        k = len(self)
        T = np.diag(self.alphas.to_float())
        if k > 1:
            b = self.betas.to_float()
            T += np.diag(b, 1) + np.diag(b, -1)
        return T


@dataclass
class EigenDecomposition:
    """Tridiagonal eigenvalues (ascending) with first eigenvector components."""

    values: DD
    first_components: DD

    @property
    def weights(self) -> DD:
        return self.first_components * self.first_components


def tridiag_eigen(J: JacobiMatrix, rows: DD | None = None) -> EigenDecomposition:
    """Eigen-decomposition of a Jacobi matrix in extended precision.

    ``rows`` optionally replaces the default e_0 row accumulator: an (m, k) dd
    block whose rows r end up holding (rows_r^T s_i) for eigenvectors s_i.
    """
    k = len(J)
    if rows is None:
        r_hi = np.zeros((1, k))
        r_hi[0, 0] = 1.0
        rows = DD.of(r_hi, np.zeros((1, k)))
    values, acc = _backend.ql_eigen(J.alphas, J.betas, rows, max_iter=50)
    weights_sq = np.sum(np.atleast_2d(acc.hi) ** 2, axis=0)
    order = np.lexsort((-weights_sq, values.hi))
    values = values[order]
    acc = DD.of(np.atleast_2d(acc.hi)[:, order], np.atleast_2d(acc.lo)[:, order])
    return EigenDecomposition(values=values, first_components=acc[0])


def tridiag_eigen_rows(J_alphas: DD, J_betas_with_zeros: DD, rows: DD):
    """QL on a tridiagonal that may contain exact zero off-diagonals (split
    blocks), bypassing JacobiMatrix validation.  Returns (values, rows) sorted
    ascending."""
    values, acc = _backend.ql_eigen(J_alphas, J_betas_with_zeros, rows, max_iter=50)
    order = np.argsort(values.hi, kind="stable")
    values = values[order]
    acc = DD.of(np.atleast_2d(acc.hi)[:, order], np.atleast_2d(acc.lo)[:, order])
    return values, acc


def dense_symmetric_eigen(A: np.ndarray):
    """Full eigendecomposition (ascending values, orthonormal columns) of a
    symmetric matrix at working precision."""
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if n > _DENSE_LIMIT:
        raise ValueError(f"dense eigensolver limited to n <= {_DENSE_LIMIT}, got {n}")
    values, vectors = scipy.linalg.eigh(A)
    return values, vectors


def householder_tridiag_dd(A: np.ndarray, b: DD):
    """Extended-precision Householder tridiagonalization of symmetric A,
    also accumulating c = V^T b for the reflector product V.

    Returns (diag: DD (n,), offdiag: DD (n,), c: DD (n,)) with offdiag[n-1]=0;
    off-diagonal entries are made nonnegative by a diagonal similarity.
    Intended for small n (pure vectorized dd, O(n^3)).
    """
    n = A.shape[0]
    M = DD(np.array(A, dtype=np.float64))
    c = b.copy()
    for j in range(n - 2):
        x = M[j + 1 :, j]
        sigma = _backend.norm(x)
        if float(sigma) == 0.0:
            continue
        v = x.copy()
        x0 = x[0]
        alpha = -sigma if float(x0) >= 0 else sigma
        v[0] = x0 - alpha
        vnorm = _backend.norm(v)
        if float(vnorm) == 0.0:
            continue
        v = v / vnorm
        # symmetric update M <- H M H, H = I - 2 v v^T
        sub = M[j + 1 :, j + 1 :]
        w = DD.of(*_mat_dd_vec(sub, v))
        kappa = _backend.dot(v, w)
        u = w - v * kappa
        outer_hi, outer_lo = _outer2(v, u)
        M[j + 1 :, j + 1 :] = sub - DD.of(outer_hi, outer_lo)
        M[j + 1 :, j] = DD.zeros(n - j - 1)
        M[j + 1, j] = alpha
        M[j, j + 1 :] = DD.zeros(n - j - 1)
        M[j, j + 1] = alpha
        ctail = c[j + 1 :]
        c[j + 1 :] = ctail - v * (_backend.dot(v, ctail) * 2.0)
    diag = DD.of(np.diagonal(M.hi).copy(), np.diagonal(M.lo).copy())
    off = DD.zeros(n)
    signs = np.ones(n)
    for i in range(n - 1):
        e = M[i + 1, i]
        signs[i + 1] = signs[i] * (1.0 if float(e) >= 0 else -1.0)
        off[i] = abs(e)
    c = DD.of(c.hi * signs, c.lo * signs)
    return diag, off, c


def _mat_dd_vec(M: DD, v: DD):
    from . import _dd

    ph, pl = _dd.mul_(M.hi, M.lo, v.hi[None, :], v.lo[None, :])
    return _dd.npsum_(ph, pl, axis=1)


def _outer2(v: DD, u: DD):
    """2*(v u^T + u v^T) in dd."""
    from . import _dd

    ah, al = _dd.mul_(v.hi[:, None], v.lo[:, None], u.hi[None, :], u.lo[None, :])
    bh, bl = _dd.mul_(u.hi[:, None], u.lo[:, None], v.hi[None, :], v.lo[None, :])
    sh, sl = _dd.add_(ah, al, bh, bl)
    return _dd.mul_d(sh, sl, 2.0)


def apply_matrix_function(A: np.ndarray, f, v, eigen=None) -> DD:
    """f(A) v = U f(Lambda) U^T v, combined in extended precision.

    ``f`` maps a dd array of eigenvalues to a dd array; NaNs in the result are
    reported as "f undefined at eigenvalue ...".  ``eigen`` may pass a cached
    (values, vectors) pair from dense_symmetric_eigen.
    """
    if eigen is None:
        eigen = dense_symmetric_eigen(A)
    values, U = eigen
    v = as_dd(v)
    t = _backend.matvec(np.ascontiguousarray(U.T), v)
    fv = f(DD(values))
    bad = ~(np.isfinite(fv.hi) & np.isfinite(fv.lo))
    if np.any(bad):
        lam = values[np.nonzero(bad)[0][0]]
        raise ValueError(f"matrix function undefined at eigenvalue {lam!r}")
    t = t * fv
    return _backend.matvec(np.ascontiguousarray(U), t)


def operator_norm_estimate(matvec, n: int, start: DD | None = None) -> float:
    """Spectral-norm estimate by 30 extended-precision power-method steps.

    Iterates on A^2 (15 squared steps = 30 applications of A) so that the
    +/- lambda_max symmetry of Wigner-type matrices does not stall progress;
    the result carries the (1 + 1e-10) safety factor used consistently across
    the rounding diagnostics.
    """
    if start is None:
        hi = np.full(n, 1.0 / np.sqrt(n))
        hi[::2] += 1.0 / (2.0 * np.sqrt(n))  # break symmetry deterministically
        start = DD(hi)
    w = start / _backend.norm(start)
    est = DD(0.0)
    for _ in range(15):
        aw = matvec(w)
        est = _backend.norm(aw)
        if float(est) == 0.0:
            return 0.0
        w = matvec(aw)
        nw = _backend.norm(w)
        if float(nw) == 0.0:
            return float(est) * (1.0 + 1e-10)
        w = w / nw
    return float(est) * (1.0 + 1e-10)
