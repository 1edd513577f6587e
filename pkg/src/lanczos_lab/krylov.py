"""Lanczos-based linear solves x_k = Q_k T_k^{-1} e_0 with A-norm error
tracking against the deterministic random-matrix limit d^{k/2}/(1-d).

The standard coupled CG recursion is deliberately not implemented: the
analysis object is the Lanczos-derived iterate, combined at working precision
from the run's Q and T.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from . import _backend
from ._dd import DD
from .ensembles import ProblemInstance
from .lanczos import LanczosRun


@dataclass
class SolveTrace:
    ks: np.ndarray
    errors: np.ndarray
    limit_curve: np.ndarray
    stagnation_index: Optional[int]


def _ldl_tridiag_solve_e0(alphas: np.ndarray, betas: np.ndarray):
    """Solve T y = e_0 by the LDL^T factorization of the tridiagonal T;
    raises naming the first nonpositive pivot if T is not positive definite."""
    k = len(alphas)
    d = np.empty(k)
    l = np.empty(max(k - 1, 0))
    d[0] = alphas[0]
    if d[0] <= 0:
        raise ValueError("T_k not positive definite: pivot 0 is nonpositive")
    for i in range(k - 1):
        l[i] = betas[i] / d[i]
        d[i + 1] = alphas[i + 1] - betas[i] * l[i]
        if d[i + 1] <= 0:
            raise ValueError(
                f"T_k not positive definite: pivot {i + 1} is nonpositive"
            )
    # L z = e0 ; D w = z ; L^T y = w
    z = np.zeros(k)
    z[0] = 1.0
    for i in range(1, k):
        z[i] = -l[i - 1] * z[i - 1]
    w = z / d
    y = w.copy()
    for i in range(k - 2, -1, -1):
        y[i] = w[i] - l[i] * y[i + 1]
    return y


def lanczos_solve(problem: ProblemInstance, run: LanczosRun, k: int) -> np.ndarray:
    """x_k = Q_k T_k^{-1} e_0 at working precision from the run's quantities."""
    m = run.k_completed
    if k < 1 or k > m:
        raise ValueError(f"k must be in 1..{m}")
    alphas, betas = run.coefficient_arrays()
    y = _ldl_tridiag_solve_e0(alphas[:k], betas[: k - 1])
    Q = run.Q
    if isinstance(Q, DD):
        Qf = Q.to_float()[:, :k]
    else:
        Qf = np.asarray(Q[:, :k], dtype=np.float64)
    return Qf @ y


def _solution_ext(problem: ProblemInstance) -> DD:
    """A^{-1} b to extended accuracy: binary64 Cholesky plus double-double
    iterative refinement (two sweeps close the residual to the dd level for
    these well-conditioned systems)."""
    if "chol" not in problem._cache:
        try:
            problem._cache["chol"] = scipy.linalg.cho_factor(problem.matrix)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("matrix is not symmetric positive definite") from exc
    chol = problem._cache["chol"]
    if "xhat" not in problem._cache:
        b = problem.vector
        x = DD(scipy.linalg.cho_solve(chol, b.to_float()))
        for _ in range(2):
            r = b - _backend.matvec(problem.matrix, x)
            x = x + DD(scipy.linalg.cho_solve(chol, r.to_float()))
        problem._cache["xhat"] = x
    return problem._cache["xhat"]


def a_norm_error(problem: ProblemInstance, x) -> float:
    """|| A^{-1} b - x ||_A, quadratic form evaluated in extended precision."""
    xhat = _solution_ext(problem)
    e = xhat - DD(np.asarray(x, dtype=np.float64)) if not isinstance(x, DD) else xhat - x
    q = _backend.dot(e, _backend.matvec(problem.matrix, e))
    val = float(q)
    return float(np.sqrt(max(val, 0.0)))


def limit_curve(d: float, ks: np.ndarray) -> np.ndarray:
    """The deterministic large-N error curve d^{k/2}/(1-d) for aspect d."""
    ks = np.asarray(ks, dtype=np.float64)
    return d ** (ks / 2.0) / (1.0 - d)


def solve_trace(problem: ProblemInstance, run: LanczosRun, d: float) -> SolveTrace:
    """Per-iteration A-norm errors of the Lanczos iterate with the limiting
    curve; the trace stops at the stagnation index (first k whose error
    improved by less than 1% for three consecutive steps)."""
    m = run.k_completed
    ks = np.arange(1, m + 1)
    errors = np.empty(m)
    stagnation = None
    flat = 0
    upto = m
    for i, k in enumerate(ks):
        errors[i] = a_norm_error(problem, lanczos_solve(problem, run, int(k)))
        if i > 0:
            improvement = (errors[i - 1] - errors[i]) / max(errors[i - 1], 1e-300)
            flat = flat + 1 if improvement < 0.01 else 0
            if flat >= 3 and stagnation is None:
                stagnation = int(k)
                upto = i + 1
                break
    ks = ks[:upto]
    errors = errors[:upto]
    return SolveTrace(
        ks=ks,
        errors=errors,
        limit_curve=limit_curve(d, ks),
        stagnation_index=stagnation,
    )


def trace_to_csv(trace: SolveTrace, path: str, precision: str, seed: int) -> None:
    with open(path, "w") as fh:
        fh.write("k,error,limit,precision,seed\n")
        for i in range(len(trace.ks)):
            fh.write(
                f"{int(trace.ks[i])},{trace.errors[i]!r},"
                f"{trace.limit_curve[i]!r},{precision},{seed}\n"
            )
