"""The three-term Lanczos iteration at any precision, plus measured rounding
diagnostics.

The loop body is the textbook algorithm: q~ = A q_n - beta_{n-1} q_{n-1},
alpha_n = q~^T q_n, q^ = q~ - alpha_n q_n, beta_n = ||q^||.  Every elementary
operation executes natively at the requested precision (binary32 arrays for
LOW32, binary64 for WORK64, double-double kernels for EXT128); optional
reorthogonalization projects q^ against all previous basis vectors twice
before normalization, at the same precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from ._dd import DD, as_dd
from .ensembles import ProblemInstance
from .scalars import Precision, round_to
from .spectral import JacobiMatrix, tridiag_eigen


class DivergentRunError(RuntimeError):
    pass


@dataclass(frozen=True)
class LanczosOptions:
    k: int
    precision: Precision
    reorthogonalize: bool = False
    breakdown_tol: Optional[float] = None  # None: 10 n u(p) ||A||-estimate

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("iteration count k must be >= 1")
        if self.breakdown_tol is not None and self.breakdown_tol < 0:
            raise ValueError("breakdown_tol must be nonnegative")


class LanczosRun:
    """Output of a Lanczos run: basis vectors (native dtype of the run's
    precision, one column per q_0..q_m, plus q_m+1 unless the run terminated),
    coefficient sequences as exact dd lifts, and the termination index."""

    def __init__(self, problem, options, alphas: DD, betas: DD, Q, terminated_at):
        self.problem = problem
        self.options = options
        self.alphas = alphas
        self.betas = betas
        self.Q = Q
        self.terminated_at = terminated_at

    @property
    def k_completed(self) -> int:
        return len(self.alphas)

    @property
    def has_final_vector(self) -> bool:
        ncols = self.Q.shape[1]
        return ncols == self.k_completed + 1

    @property
    def T(self) -> JacobiMatrix:
        m = self.k_completed
        return JacobiMatrix(self.alphas, self.betas[: m - 1])

    @property
    def beta_last(self) -> DD:
        return self.betas[self.k_completed - 1]

    def basis_dd(self, columns: Optional[int] = None) -> DD:
        Q = self.Q
        if columns is not None:
            Q = Q[:, :columns] if isinstance(Q, DD) else Q[:, :columns]
        if isinstance(Q, DD):
            return Q
        return DD(np.ascontiguousarray(Q, dtype=np.float64))

    def coefficient_arrays(self):
        return self.alphas.to_float(), self.betas.to_float()


@dataclass
class RoundingDiagnostics:
    """Measured residuals of the perturbed recurrences (Def. of the per-run
    precision): all norms spectral, normalized by the consistent ||A||
    estimate where indicated."""

    F_norm: float
    DminusI_norm: float
    H_norm: float
    eta: float
    eps_lan: float
    R: np.ndarray
    norm_A: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "F_norm": self.F_norm,
                "DminusI_norm": self.DminusI_norm,
                "H_norm": self.H_norm,
                "eta": self.eta,
                "eps_lan": self.eps_lan,
                "norm_A": self.norm_A,
            }
        )


class _Float32Space:
    dtype = np.float32

    def __init__(self, matrix):
        self.A = np.ascontiguousarray(matrix, dtype=np.float32)

    def vector(self, b_dd):
        return round_to(Precision.LOW32, b_dd)

    def matvec(self, v):
        return self.A @ v

    @staticmethod
    def dot(u, v):
        return np.dot(u, v)

    @staticmethod
    def norm(v):
        return np.float32(np.sqrt(np.dot(v, v)))

    @staticmethod
    def alloc(n, cols):
        return np.zeros((n, cols), dtype=np.float32)

    @staticmethod
    def gram(Q, v):
        return Q.T @ v

    @staticmethod
    def unproject(v, Q, h):
        return v - Q @ h

    @staticmethod
    def is_finite(*scalars):
        return all(np.isfinite(float(s)) for s in scalars)

    @staticmethod
    def value(s):
        return float(s)


class _Float64Space(_Float32Space):
    dtype = np.float64

    def __init__(self, matrix):
        self.A = np.ascontiguousarray(matrix, dtype=np.float64)

    def vector(self, b_dd):
        return round_to(Precision.WORK64, b_dd)

    @staticmethod
    def norm(v):
        return np.sqrt(np.dot(v, v))

    @staticmethod
    def alloc(n, cols):
        return np.zeros((n, cols), dtype=np.float64)


class _ExtSpace:
    dtype = object

    def __init__(self, matvec):
        self._matvec = matvec

    def vector(self, b_dd):
        return as_dd(b_dd).copy()

    def matvec(self, v):
        return self._matvec(v)

    @staticmethod
    def dot(u, v):
        return _backend.dot(u, v)

    @staticmethod
    def norm(v):
        return _backend.norm(v)

    @staticmethod
    def alloc(n, cols):
        return DD.zeros((n, cols))

    @staticmethod
    def gram(Q, v):
        return _backend.gramt(Q, v)

    @staticmethod
    def unproject(v, Q, h):
        return v - _backend.matvec_dd(Q, h)

    @staticmethod
    def is_finite(*scalars):
        return all(s.isfinite() for s in scalars)

    @staticmethod
    def value(s):
        return float(s)


def _lanczos_core(space, b_dd, n, k, reorthogonalize, tol):
    """Run the loop in the given arithmetic space; returns (alphas, betas,
    Q matrix, terminated_at) with native-precision columns and scalars."""
    Q = space.alloc(n, k + 1)
    alphas = []
    betas = []
    q = space.vector(b_dd)
    nb = space.norm(q)
    q = q / nb
    Q[:, 0] = q
    q_prev = None
    beta_prev = None
    terminated_at = None
    cols = 1
    for it in range(k):
        qt = space.matvec(q)
        if beta_prev is not None:
            qt = qt - beta_prev * q_prev
        alpha = space.dot(qt, q)
        qh = qt - alpha * q
        if reorthogonalize:
            basis = Q[:, :cols]
            for _ in range(2):
                h = space.gram(basis, qh)
                qh = space.unproject(qh, basis, h)
        beta = space.norm(qh)
        if not space.is_finite(alpha, beta):
            raise DivergentRunError("divergent run")
        alphas.append(alpha)
        betas.append(beta)
        if space.value(beta) <= tol:
            terminated_at = it
            break
        q_prev, q = q, qh / beta
        beta_prev = beta
        Q[:, cols] = q
        cols += 1
    return alphas, betas, Q[:, :cols], terminated_at


def _pack_coeffs(values) -> DD:
    if values and isinstance(values[0], DD):
        return DD.of(
            np.array([v.hi for v in values]), np.array([v.lo for v in values])
        )
    return DD(np.array([float(v) for v in values], dtype=np.float64))


def run_lanczos(problem: ProblemInstance, opts: LanczosOptions) -> LanczosRun:
    """Alg.-1 Lanczos on (A, b) at the requested precision."""
    n = problem.n
    if opts.k > n:
        raise ValueError(f"k = {opts.k} exceeds problem dimension n = {n}")
    if opts.precision is Precision.LOW32:
        space = _Float32Space(problem.matrix)
    elif opts.precision is Precision.WORK64:
        space = _Float64Space(problem.matrix)
    else:
        space = _ExtSpace(problem.matvec_ext)
    tol = opts.breakdown_tol
    if tol is None:
        tol = 10.0 * n * opts.precision.unit_roundoff * problem.norm_estimate()
    alphas, betas, Q, terminated_at = _lanczos_core(
        space, problem.vector, n, opts.k, opts.reorthogonalize, tol
    )
    return LanczosRun(
        problem,
        opts,
        _pack_coeffs(alphas),
        _pack_coeffs(betas),
        Q,
        terminated_at,
    )


def lanczos_on_operator(matvec, b: DD, k: int, reorthogonalize=True, tol=0.0):
    """Extended-precision Lanczos on an arbitrary dd operator (used by the
    Stieltjes procedure on discrete measures)."""
    n = len(np.atleast_1d(b.hi))
    space = _ExtSpace(matvec)
    alphas, betas, Q, terminated_at = _lanczos_core(
        space, b, n, k, reorthogonalize, tol
    )
    return _pack_coeffs(alphas), _pack_coeffs(betas), Q, terminated_at


def _tridiag_right_multiply(Q: DD, alphas: DD, betas: DD) -> DD:
    """Columns of Q @ T for the tridiagonal T given by (alphas, betas)."""
    m = len(alphas)
    cols_hi = np.empty_like(Q.hi[:, :m])
    cols_lo = np.empty_like(Q.lo[:, :m])
    for j in range(m):
        col = Q[:, j] * alphas[j]
        if j > 0:
            col = col + Q[:, j - 1] * betas[j - 1]
        if j < m - 1:
            col = col + Q[:, j + 1] * betas[j]
        cols_hi[:, j] = col.hi
        cols_lo[:, j] = col.lo
    return DD.of(cols_hi, cols_lo)


def _spectral_norm(M: np.ndarray) -> float:
    import scipy.linalg

    if M.size == 0:
        return 0.0
    return float(scipy.linalg.svdvals(M)[0]) if min(M.shape) > 1 else float(
        np.linalg.norm(M)
    )


def measure_diagnostics(problem: ProblemInstance, run: LanczosRun) -> RoundingDiagnostics:
    """Extended-precision residuals of the perturbed three-term recurrences.

    F is the residual of A Q - Q T - beta q e^T; R and D are the strict-upper
    and diagonal parts of Q^T Q; H is the strict upper triangle of the residual
    of T R - R T - beta (Q^T q) e^T; eta measures how far the Ritz values
    escape the spectrum hull of A.  eps_lan is the max of the four quantities
    after the normalizations of the per-run precision definition.
    """
    m = run.k_completed
    Q = run.basis_dd()
    Qk = Q[:, :m]
    alphas, betas = run.alphas, run.betas
    A = problem.matrix

    # F = A Q_k - Q_k T_k - beta_{m-1} q_m e_{m-1}^T, in dd
    aq_h = np.empty((problem.n, m))
    aq_l = np.empty((problem.n, m))
    for j in range(m):
        col = _backend.matvec(A, Qk[:, j])
        aq_h[:, j] = col.hi
        aq_l[:, j] = col.lo
    AQ = DD.of(aq_h, aq_l)
    QT = _tridiag_right_multiply(Qk, alphas, betas[: m - 1])
    F = AQ - QT
    if run.has_final_vector:
        last = F[:, m - 1] - Q[:, m] * run.beta_last
        F[:, m - 1] = last
    F_norm = _spectral_norm(F.hi + F.lo)

    # Gram matrix in dd
    G_h = np.empty((m, m))
    G_l = np.empty((m, m))
    for j in range(m):
        col = _backend.gramt(Qk, Qk[:, j])
        G_h[:, j] = col.hi
        G_l[:, j] = col.lo
    G = DD.of(G_h, G_l)
    R = DD.of(np.triu(G.hi, 1), np.triu(G.lo, 1))
    diag = DD.of(np.diagonal(G.hi).copy(), np.diagonal(G.lo).copy())
    DminusI_norm = float(np.max(np.abs((diag - 1.0).to_float()))) if m else 0.0

    # H = strict upper part of (T R - R T - beta_{m-1} Q^T q_m e_{m-1}^T)
    TR = _tridiag_left_multiply(R, alphas, betas[: m - 1])
    RT = _tridiag_right_multiply(R, alphas, betas[: m - 1])
    Hres = TR - RT
    if run.has_final_vector:
        corr = _backend.gramt(Qk, Q[:, m]) * run.beta_last
        last = Hres[:, m - 1] - corr
        Hres[:, m - 1] = last
    Hmat = np.triu(Hres.hi + Hres.lo, 1)
    H_norm = _spectral_norm(Hmat)

    lam = problem.eigenvalues()
    theta = tridiag_eigen(run.T).values.to_float()
    eta = max(0.0, float(lam[0] - theta[0]), float(theta[-1] - lam[-1]))

    norm_A = problem.norm_estimate()
    eps_lan = max(F_norm / norm_A, DminusI_norm, H_norm / norm_A, eta / norm_A)
    return RoundingDiagnostics(
        F_norm=F_norm,
        DminusI_norm=DminusI_norm,
        H_norm=H_norm,
        eta=eta,
        eps_lan=eps_lan,
        R=R.to_float(),
        norm_A=norm_A,
    )


def _tridiag_left_multiply(M: DD, alphas: DD, betas: DD) -> DD:
    """T @ M for tridiagonal T: rows are alpha_i M_i + beta_{i-1} M_{i-1} + beta_i M_{i+1}."""
    m = len(alphas)
    rows_hi = np.empty_like(M.hi[:m, :])
    rows_lo = np.empty_like(M.lo[:m, :])
    for i in range(m):
        row = M[i, :] * alphas[i]
        if i > 0:
            row = row + M[i - 1, :] * betas[i - 1]
        if i < m - 1:
            row = row + M[i + 1, :] * betas[i]
        rows_hi[i, :] = row.hi
        rows_lo[i, :] = row.lo
    return DD.of(rows_hi, rows_lo)


def save_run_csv(run: LanczosRun, path: str, diagnostics=None) -> None:
    """CSV dump (n, alpha, beta) plus an optional JSON diagnostics sidecar."""
    a, b = run.coefficient_arrays()
    with open(path, "w") as fh:
        fh.write("n,alpha,beta\n")
        for i in range(len(a)):
            fh.write(f"{i},{a[i]!r},{b[i]!r}\n")
    if diagnostics is not None:
        with open(path + ".diagnostics.json", "w") as fh:
            fh.write(diagnostics.to_json())
