"""Backward- and forward-stability constructions and checks.

From a finite-precision run this module builds the perturbation function h,
the nearby measure mu* = (1 + h) mu, the nearby starting vector
b* = (I + h(A))^{1/2} b, audits the computable bound chain for the modified
Chebyshev moments, evaluates the regularity corollaries, and computes the
explicit 2x2 forward-stability diagnostics for square-root-edge references.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from . import _backend, orthopoly
from ._dd import DD, as_dd
from .ensembles import ProblemInstance
from .lanczos import LanczosOptions, LanczosRun, RoundingDiagnostics, run_lanczos
from .measures import (
    DiscreteMeasure,
    MarchenkoPasturMeasure,
    Measure,
    PerturbedMeasure,
    SemicircleMeasure,
    ks_distance,
    quadrature_measure,
)
from .orthopoly import (
    OrthoBasis,
    eval_orthonormal_all,
    modified_moments,
    moment_gap,
    op_max,
    stieltjes_jacobi,
)
from .scalars import Precision
from .spectral import apply_matrix_function

# Absolute constants from the moment-stability bound chain; pessimistic by
# design and printed in reports rather than tuned.
C_CONST = 20.0
D_CONST = 6096.0


class PerturbationFunction:
    """h(x) = sum_{n<2k} (m_n(mu_bar_k; mu) - m_n(mu; mu)) p_n(x; mu)."""

    def __init__(self, reference: OrthoBasis, coefficients: DD, k: int,
                 moments_target: DD, moments_reference: DD):
        self.reference = reference
        self.coefficients = coefficients
        self.k = k
        self.moments_target = moments_target
        self.moments_reference = moments_reference
        a, b = reference.source.support()
        grid_vals = self._eval_grid(a, b)
        self.sup_norm_est = float(np.max(np.abs(grid_vals.to_float())))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x) -> DD:
        vals = eval_orthonormal_all(self.reference, self.degree, as_dd(x))
        acc = vals[0] * self.coefficients[0]
        for n in range(1, len(vals)):
            acc = acc + vals[n] * self.coefficients[n]
        return acc

    def _eval_grid(self, a: float, b: float) -> DD:
        npts = 8 * max(self.degree, 1) + 9
        grid = orthopoly._chebyshev_grid(npts, a, b)
        return self(DD(grid))

    def at_source_atoms(self) -> DD:
        """h at every atom of the (discrete) reference measure, through the
        stored Stieltjes columns when available (roundoff-exact orthogonality,
        unlike the raw recurrence at high degree)."""
        if self.reference.columns is not None:
            return self.reference.values_at_source_atoms(self.coefficients)
        return self(self.reference.source.atoms)

    def coefficient_gap(self) -> float:
        """Delta_k(mu_bar_k, mu; mu) = max_n |coefficients_n|."""
        return float(np.max(np.abs(self.coefficients.to_float())))

    def h_bound_rhs(self) -> float:
        """2k Delta_k(mu_bar_k, mu; mu) P_k(mu; [a,b])."""
        a, b = self.reference.source.support()
        P = op_max(self.reference, self.k, (a, b))
        return 2.0 * self.k * self.coefficient_gap() * P


def build_h(run: LanczosRun, mu: Measure,
            basis: Optional[OrthoBasis] = None) -> PerturbationFunction:
    """Perturbation function of the run against the reference measure.

    Needs the reference basis through degree 2k-1; a discrete mu with fewer
    than 2k atoms cannot support the construction and is rejected.  A
    precomputed basis of mu may be passed to amortize the Stieltjes run.
    """
    k = run.k_completed
    if basis is None:
        basis = stieltjes_jacobi(mu, 2 * k)
    elif basis.source is not mu:
        raise ValueError("provided basis does not belong to the reference measure")
    if len(basis.jacobi) < 2 * k:
        raise ValueError(
            f"reference basis terminates at length {len(basis.jacobi)} < 2k = {2 * k}"
        )
    mu_bar = quadrature_measure(run.T)
    mom_bar = modified_moments(mu_bar, basis, 2 * k).values
    mom_mu = modified_moments(mu, basis, 2 * k).values
    return PerturbationFunction(
        reference=basis,
        coefficients=mom_bar - mom_mu,
        k=k,
        moments_target=mom_bar,
        moments_reference=mom_mu,
    )


def build_mu_star(h: PerturbationFunction, mu: Measure, verify_tol: float = 1e-18):
    """mu* = (1 + h) mu, possibly signed (flagged, not an error).

    Verifies internally that the modified moments of mu* against mu match
    those of the quadrature measure of the run through degree 2k-1.
    """
    if isinstance(mu, DiscreteMeasure):
        if mu is h.reference.source:
            factors = 1.0 + h.at_source_atoms()
        else:
            factors = 1.0 + h(mu.atoms)
        signed = bool(np.any(factors.to_float() < 0.0))
        mu_star: Measure = mu.reweighted(factors, signed=signed)
    else:
        a, b = mu.support()
        grid = orthopoly._chebyshev_grid(8 * max(h.degree, 1) + 9, a, b)
        signed = bool(np.min(1.0 + h(DD(grid)).to_float()) < 0.0)
        mu_star = PerturbedMeasure(mu, h, h.degree, signed=signed)
    count = len(h.moments_target)
    mom_star = modified_moments(mu_star, h.reference, count).values
    gap = np.max(np.abs((mom_star - h.moments_target).to_float()))
    if gap > verify_tol:
        raise RuntimeError(
            f"mu* moment-matching violated: max gap {gap:.3e} > {verify_tol:.1e}"
        )
    return mu_star


@dataclass
class BStarResult:
    vector: DD
    distance: float
    h_sup_on_spectrum: float
    distance_bound_ok: bool


def build_b_star(problem: ProblemInstance, h: PerturbationFunction) -> BStarResult:
    """b* = (I + h(A))^{1/2} b via the spectral decomposition, in extended
    precision; valid only while ||h||_{Lambda(A)} < 1."""
    lam, _ = problem.eigendecomposition()
    hvals = h(DD(lam))
    hflat = hvals.to_float()
    h_sup = float(np.max(np.abs(hflat)))
    if np.any(1.0 + hflat <= 0.0):
        idx = int(np.argmin(1.0 + hflat))
        raise ValueError(
            "construction invalid, ||h||_Lambda >= 1: "
            f"1 + h({lam[idx]!r}) = {1.0 + hflat[idx]!r} <= 0"
        )

    # delta form of (I + h(A))^{1/2} b: the identity part is carried exactly,
    # so a vanishing h reproduces b itself instead of U U^T b
    def f(values: DD) -> DD:
        return (1.0 + h(values)).sqrt() - 1.0

    delta = apply_matrix_function(
        problem.matrix, f, problem.vector, eigen=problem.eigendecomposition()
    )
    b_star = problem.vector + delta
    dist = float(_backend.norm(delta))
    return BStarResult(
        vector=b_star,
        distance=dist,
        h_sup_on_spectrum=h_sup,
        distance_bound_ok=dist <= h_sup * (1.0 + 1e-12) + 1e-30,
    )


def verify_backward(problem: ProblemInstance, run: LanczosRun, b_star: DD):
    """Exact-arithmetic Lanczos on (A, b*); per-n coefficient errors."""
    opts = LanczosOptions(
        k=run.k_completed, precision=Precision.EXT128, reorthogonalize=True
    )
    rerun = run_lanczos(problem.with_vector(b_star), opts)
    m = min(run.k_completed, rerun.k_completed)
    a_err = np.abs((rerun.alphas[:m] - run.alphas[:m]).to_float())
    b_err = np.abs((rerun.betas[:m] - run.betas[:m]).to_float())
    return a_err, b_err


@dataclass
class ChebyshevMomentAudit:
    """Rows of the modified-Chebyshev-moment bound check on the rescaled
    problem, plus the intermediate vector bound."""

    sigma: float
    eps_hat: float
    precondition_ok: bool
    n_values: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    vec_n_values: np.ndarray
    vec_lhs: np.ndarray
    vec_rhs: np.ndarray

    @property
    def violations(self) -> int:
        return int(np.sum(self.lhs > self.rhs))

    @property
    def vec_violations(self) -> int:
        return int(np.sum(self.vec_lhs > self.vec_rhs))


def check_cheb_moment_bound(
    problem: ProblemInstance,
    run: LanczosRun,
    diagnostics: RoundingDiagnostics,
) -> ChebyshevMomentAudit:
    """Audit |int T_n d(mu_N) - int T_n d(mu_bar_k)| <= 381 k^2 eps against the
    measured per-run precision, after the affine rescale of the spectrum hull
    to [-1,1], for n <= 2k-2; and the Krylov-vector bound
    ||T_n(A)b - Q T_n(T)e_0|| <= 9 k^2 eps for n <= k-1.
    """
    lam = problem.eigenvalues()
    a, b = float(lam[0]), float(lam[-1])
    scale = 2.0 / (b - a)
    shift = -(b + a) / (b - a)
    k = run.k_completed
    sigma = max(1.0, 2.0 * diagnostics.norm_A / (b - a))
    eps_hat = sigma * diagnostics.eps_lan
    precondition_ok = bool(eps_hat < 1.0 / (5.0 * k * k)) and k > 1

    nmax = 2 * k - 2
    That = run.T.affine(scale, shift)
    mu_bar_hat = quadrature_measure(That)
    T_at_theta = orthopoly.chebyshev_T_all(nmax, mu_bar_hat.atoms)
    use_dd = 9.0 * k * k * eps_hat < 1e-9
    if use_dd:
        # near-exact run: recur t_n = T_n(A^) b in extended precision, which
        # gives both the Chebyshev moments b^T t_n and the vector residuals
        # without touching the binary64 eigendecomposition
        moments_N, vec_lhs = _cheb_vectors_dd(problem, run, scale, shift, k, nmax)
    else:
        lam_hat = DD(lam) * scale + shift
        values, U = problem.eigendecomposition()
        t = _backend.matvec(np.ascontiguousarray(U.T), problem.vector)
        weights = t * t
        T_at_lam = orthopoly.chebyshev_T_all(nmax, lam_hat)
        moments_N = [_backend.dot(T_at_lam[n], weights) for n in range(nmax + 1)]
        vec_lhs = _krylov_vector_residuals_f64(problem, run, scale, shift, k)

    ns = np.arange(nmax + 1)
    lhs = np.empty(nmax + 1)
    for n in range(nmax + 1):
        mk = _backend.dot(T_at_theta[n], mu_bar_hat.weights)
        lhs[n] = abs(float(moments_N[n] - mk))
    rhs = np.full(nmax + 1, 381.0 * k * k * eps_hat)

    vec_ns = np.arange(k)
    vec_rhs = np.full(k, 9.0 * k * k * eps_hat)

    return ChebyshevMomentAudit(
        sigma=sigma,
        eps_hat=eps_hat,
        precondition_ok=precondition_ok,
        n_values=ns,
        lhs=lhs,
        rhs=rhs,
        vec_n_values=vec_ns,
        vec_lhs=vec_lhs,
        vec_rhs=vec_rhs,
    )


def _krylov_vector_residuals_f64(problem, run, scale, shift, k):
    """||T_n(A^)b - Q T_n(T^)e_0|| for n <= k-1 through the cached binary64
    eigendecomposition (adequate whenever the bound side is far above 1e-9)."""
    m = run.k_completed
    lam, U = problem.eigendecomposition()
    lam_hat = lam * scale + shift
    c = U.T @ problem.vector.to_float()
    tprev = np.ones_like(lam_hat)
    tcur = lam_hat.copy()
    alphas_hat = run.alphas.to_float() * scale + shift
    betas_hat = run.betas.to_float() * scale
    Q = np.asarray(run.Q[:, :m], dtype=np.float64) if not isinstance(run.Q, DD) \
        else run.basis_dd().to_float()[:, :m]
    vprev = np.zeros(m)
    vprev[0] = 1.0
    vcur = np.zeros(m)
    vcur[0] = alphas_hat[0]
    if m > 1:
        vcur[1] = betas_hat[0]
    out = np.empty(k)
    out[0] = float(np.linalg.norm(U @ (tprev * c) - Q @ vprev))
    if k > 1:
        out[1] = float(np.linalg.norm(U @ (tcur * c) - Q @ vcur))
    for n in range(2, k):
        tprev, tcur = tcur, 2.0 * lam_hat * tcur - tprev
        vprev, vcur = vcur, 2.0 * _trid_apply(alphas_hat, betas_hat, vcur) - vprev
        out[n] = float(np.linalg.norm(U @ (tcur * c) - Q @ vcur))
    return out


def _cheb_vectors_dd(problem, run, scale, shift, k, nmax):
    """Extended-precision t_n = T_n(A^) b for n <= nmax: returns the moments
    b^T t_n and the residuals ||t_n - Q T_n(T^)e_0|| for n <= k-1."""
    m = run.k_completed
    A = problem.matrix
    bvec = problem.vector

    def ahat(v: DD) -> DD:
        return _backend.matvec(A, v) * scale + v * shift

    Q = run.basis_dd()[:, :m]
    alphas_hat = run.alphas * scale + shift
    betas_hat = run.betas * scale
    tprev = bvec.copy()
    tcur = ahat(bvec)
    e0 = DD.zeros(m)
    e0[0] = 1.0
    vprev = e0
    vcur = DD.zeros(m)
    vcur[0] = alphas_hat[0]
    if m > 1:
        vcur[1] = betas_hat[0]
    moments = [_backend.dot(bvec, tprev), _backend.dot(bvec, tcur)]
    residuals = np.empty(k)
    residuals[0] = float(_backend.norm(tprev - _backend.matvec_dd(Q, vprev)))
    if k > 1:
        residuals[1] = float(_backend.norm(tcur - _backend.matvec_dd(Q, vcur)))
    for n in range(2, nmax + 1):
        tprev, tcur = tcur, ahat(tcur) * 2.0 - tprev
        if n < k:
            vprev, vcur = vcur, _trid_apply_dd(alphas_hat, betas_hat, vcur) * 2.0 - vprev
            residuals[n] = float(_backend.norm(tcur - _backend.matvec_dd(Q, vcur)))
        moments.append(_backend.dot(bvec, tcur))
    return moments, residuals


def _trid_apply(alphas, betas, v):
    out = alphas * v
    out[:-1] += betas[: len(v) - 1] * v[1:]
    out[1:] += betas[: len(v) - 1] * v[:-1]
    return out


def _trid_apply_dd(alphas: DD, betas: DD, v: DD) -> DD:
    m = len(v)
    out = alphas[:m] * v
    if m > 1:
        upper = v[1:] * betas[: m - 1]
        lower = v[:-1] * betas[: m - 1]
        out[: m - 1] = out[: m - 1] + upper
        out[1:] = out[1:] + lower
    return out


@dataclass
class RegularityReport:
    d_ks: float
    ks_assumption_ok: bool
    support_condition_ok: bool
    L: float
    gamma: float
    k_eligible_vesd: bool
    k_eligible_limit: bool
    P_vesd_measured: float
    P_vesd_bound: float
    P_limit_measured: float
    P_limit_bound: float
    bounds_hold: bool


def regularity_constant(mu: Measure, gamma: float, grid: int = 400) -> float:
    """L with mu([x,y]) >= L |x-y|^gamma for all [x,y] in the support, by grid
    minimization of mass/length^gamma."""
    a, b = mu.support()
    best = np.inf
    lengths = np.linspace((b - a) / grid, b - a, grid)
    xs = np.linspace(a, b, grid)
    for ell in lengths:
        valid = xs <= b - ell + 1e-15
        x0 = xs[valid]
        mass = mu.cdf(np.minimum(x0 + ell, b)) - mu.cdf(x0)
        ratio = mass / ell ** gamma
        best = min(best, float(np.min(ratio)))
    return best


def evaluate_regularity(
    mu_N: DiscreteMeasure,
    mu_inf: Measure,
    k: int,
    N: int,
    alpha: float,
    gamma: Optional[float] = None,
    L: Optional[float] = None,
) -> RegularityReport:
    """Measure d_KS, check the KS/regularity assumptions and compare measured
    polynomial sup-norms against the regularity corollaries' right-hand sides."""
    if gamma is None:
        gamma = 1.5
    if L is None:
        L = regularity_constant(mu_inf, gamma)
    a, b = mu_inf.support()
    d_ks = ks_distance(mu_N, mu_inf)
    ks_ok = d_ks <= N ** (-alpha)
    margin = (b - a) / (32.0 * k * k)
    s0, s1 = mu_N.support()
    support_ok = (s0 >= a - margin) and (s1 <= b + margin)

    k_max_vesd = np.sqrt((b - a) / 32.0) * (L * N ** alpha / 3.0) ** (1.0 / (2 * gamma))
    k_eligible_vesd = k <= k_max_vesd
    c_for_limit = 1.0
    k_max_limit = ((b - a) / 16.0) ** (gamma / (4 + 2 * gamma)) * (
        c_for_limit * np.sqrt(L) * N ** alpha / 32.0
    ) ** (1.0 / (2 + gamma))
    k_eligible_limit = k <= k_max_limit

    basis_N = stieltjes_jacobi(mu_N, 2 * k)
    aprime = (a - margin, b + margin)
    P_vesd = op_max(basis_N, k, aprime)
    P_vesd_bound = (4.0 / np.sqrt(L)) * (32.0 / (b - a)) ** (gamma / 2.0) * k ** gamma
    basis_inf = stieltjes_jacobi(mu_inf, 2 * k)
    P_limit = op_max(basis_inf, k, (a, b))
    P_limit_bound = (2.0 / np.sqrt(L)) * (16.0 / (b - a)) ** (gamma / 2.0) * k ** gamma

    bounds_hold = True
    if k_eligible_vesd and support_ok and ks_ok:
        bounds_hold = bounds_hold and (P_vesd <= P_vesd_bound)
    bounds_hold = bounds_hold and (P_limit <= P_limit_bound)
    return RegularityReport(
        d_ks=d_ks,
        ks_assumption_ok=bool(ks_ok),
        support_condition_ok=bool(support_ok),
        L=L,
        gamma=gamma,
        k_eligible_vesd=bool(k_eligible_vesd),
        k_eligible_limit=bool(k_eligible_limit),
        P_vesd_measured=P_vesd,
        P_vesd_bound=P_vesd_bound,
        P_limit_measured=P_limit,
        P_limit_bound=P_limit_bound,
        bounds_hold=bool(bounds_hold),
    )


def _orthonormal_eval_complex(mu: Measure, n: int, z: np.ndarray):
    """(p_n(z), p_{n-1}(z)) for the closed-form references at complex z."""
    z = np.asarray(z, dtype=np.complex128)
    if isinstance(mu, SemicircleMeasure):
        a, b = mu.a, mu.b
        y = (2.0 * z - (a + b)) / (b - a)
        pn = _cheb_u_complex(n, y)
        pnm1 = _cheb_u_complex(n - 1, y)
        return pn, pnm1
    if isinstance(mu, MarchenkoPasturMeasure):
        d = mu.d
        y = (z - 1.0 - d) / (2.0 * np.sqrt(d))
        rd = np.sqrt(d)
        pn = _cheb_u_complex(n, y) + rd * _cheb_u_complex(n - 1, y)
        pnm1 = _cheb_u_complex(n - 1, y) + rd * _cheb_u_complex(n - 2, y)
        return pn, pnm1
    raise ValueError(
        f"forward diagnostics support Semicircle/MarchenkoPastur, not {type(mu).__name__}"
    )


def _cheb_u_complex(n: int, y: np.ndarray):
    if n < 0:
        return np.zeros_like(y)
    prev = np.ones_like(y)
    if n == 0:
        return prev
    cur = 2.0 * y
    for _ in range(n - 1):
        prev, cur = cur, 2.0 * y * cur - prev
    return cur


def forward_diagnostic_Mn(mu_ref: Measure, n: int, z) -> np.ndarray:
    """The 2x2 rank-one matrix M_n(z; mu) in its orthonormal-polynomial form

        [[ 2 pi i c p_n p_{n-1},   p_n^2                ],
         [ 4 pi^2 c^2 p_{n-1}^2,  -2 pi i c p_n p_{n-1} ]]

    with c = (b-a)/4 (so c = 1/2 for the semicircle and sqrt(d) for
    Marchenko-Pastur); trace and determinant vanish identically."""
    if n < 1:
        raise ValueError("M_n needs n >= 1")
    a, b = mu_ref.support()
    c = (b - a) / 4.0
    pn, pnm1 = _orthonormal_eval_complex(mu_ref, n, z)
    cross = 2.0j * np.pi * c * pn * pnm1
    M = np.empty(np.shape(pn) + (2, 2), dtype=np.complex128)
    M[..., 0, 0] = cross
    M[..., 0, 1] = pn * pn
    M[..., 1, 0] = 4.0 * np.pi ** 2 * c ** 2 * pnm1 * pnm1
    M[..., 1, 1] = -cross
    return M


def delta_n_estimator(mu_ref: Measure, n: int, h, grid_points: int = 2001) -> float:
    """Delta(n) = sup over the support of |h(z)| rho(z) ||M_n(z)||_F."""
    a, b = mu_ref.support()
    z = np.linspace(a, b, grid_points)
    M = forward_diagnostic_Mn(mu_ref, n, z)
    fro = np.sqrt(np.sum(np.abs(M) ** 2, axis=(-2, -1)))
    rho = mu_ref.density(z)
    hz = np.abs(h(DD(z)).to_float())
    return float(np.max(hz * rho * fro))


@dataclass
class StabilityReport:
    """Everything measured for one run against one reference measure."""

    k: int
    precision: str
    eps_lan: float
    sigma: float
    constants: Dict[str, float]
    moment_gaps: Dict[str, float]
    h_sup_on_grid: float
    h_sup_on_spectrum: float
    b_star_distance: Optional[float]
    forward_alpha_err: np.ndarray
    forward_beta_err: np.ndarray
    backward_alpha_err: Optional[np.ndarray]
    backward_beta_err: Optional[np.ndarray]
    bound_values: Dict[str, float]
    flags: Dict[str, bool]
    moment_gap_rows: np.ndarray  # (n, |m_n(mu_bar) - m_n(mu_N)|) pairs

    def to_json(self) -> str:
        import json

        return json.dumps(
            {
                "k": self.k,
                "precision": self.precision,
                "eps_lan": self.eps_lan,
                "sigma": self.sigma,
                "constants": self.constants,
                "moment_gaps": self.moment_gaps,
                "h_sup_on_grid": self.h_sup_on_grid,
                "h_sup_on_spectrum": self.h_sup_on_spectrum,
                "b_star_distance": self.b_star_distance,
                "bound_values": self.bound_values,
                "flags": self.flags,
            }
        )

    def save_tables(self, prefix: str) -> None:
        np.savetxt(
            prefix + "_moment_gaps.csv",
            self.moment_gap_rows,
            delimiter=",",
            header="n,gap",
            comments="",
        )
        rows = np.column_stack(
            [
                np.arange(len(self.forward_alpha_err)),
                self.forward_alpha_err,
                self.forward_beta_err,
            ]
        )
        np.savetxt(
            prefix + "_forward_errors.csv",
            rows,
            delimiter=",",
            header="n,alpha_err,beta_err",
            comments="",
        )


def build_stability_report(
    problem: ProblemInstance,
    run: LanczosRun,
    diagnostics: RoundingDiagnostics,
    reference: Optional[Measure] = None,
) -> StabilityReport:
    """End-to-end report: h, mu*, b* (when the reference is the VESD itself),
    measured moment gaps, forward errors against an exact run, and the
    evaluated right-hand sides of the backward-stability bounds."""
    k = run.k_completed
    mu_N = problem_vesd(problem)
    mu = mu_N if reference is None else reference
    h = build_h(run, mu)
    mu_star = build_mu_star(h, mu)
    basis = h.reference
    a, b = mu.support()
    lam = problem.eigenvalues()
    sigma = max(1.0, 2.0 * diagnostics.norm_A / (b - a))

    gaps = {
        "mu_bar_vs_mu": h.coefficient_gap(),
        "mu_star_vs_mu_N": moment_gap(mu_star, mu_N, basis, 2 * k),
        "mu_N_vs_mu": moment_gap(mu_N, mu, basis, 2 * k),
    }
    P = op_max(basis, k, (a, b))
    bound_a_rhs = D_CONST * sigma * P * k ** 3 * diagnostics.eps_lan
    bound_b_rhs = 2.0 * k * P * (gaps["mu_star_vs_mu_N"] + gaps["mu_N_vs_mu"])

    hvals = h(DD(lam)).to_float()
    h_sup_spec = float(np.max(np.abs(hvals)))

    exact = run_lanczos(
        problem,
        LanczosOptions(k=k, precision=Precision.EXT128, reorthogonalize=True),
    )
    m = min(k, exact.k_completed)
    fwd_a = np.abs((exact.alphas[:m] - run.alphas[:m]).to_float())
    fwd_b = np.abs((exact.betas[:m] - run.betas[:m]).to_float())

    b_star_distance = None
    back_a = back_b = None
    flags = {
        "h_exceeds_one": h_sup_spec >= 1.0,
        "mu_star_signed": bool(mu_star.signed),
        "thm31a_ok": gaps["mu_star_vs_mu_N"] <= bound_a_rhs,
        "thm31b_ok": h.sup_norm_est <= bound_b_rhs * (1 + 1e-12) + 1e-300,
        "eps_precondition_ok": diagnostics.eps_lan < 1.0 / (sigma * C_CONST * k * k),
    }
    if mu is mu_N and not flags["h_exceeds_one"]:
        bstar = build_b_star(problem, h)
        b_star_distance = bstar.distance
        rerun = run_lanczos(
            problem.with_vector(bstar.vector),
            LanczosOptions(k=k, precision=Precision.EXT128, reorthogonalize=True),
        )
        mm = min(m, rerun.k_completed)
        back_a = np.abs((rerun.alphas[:mm] - run.alphas[:mm]).to_float())
        back_b = np.abs((rerun.betas[:mm] - run.betas[:mm]).to_float())
        cross_a = np.abs((exact.alphas[:mm] - rerun.alphas[:mm]).to_float())
        cross_b = np.abs((exact.betas[:mm] - rerun.betas[:mm]).to_float())
        flags["b_star_distance_bound_ok"] = bstar.distance_bound_ok
        # triangle consistency: forward error <= backward error + exact-run
        # gap (exact over the reals; the slack covers the float64 rounding of
        # the three |.| conversions)
        flags["backward_forward_triangle_ok"] = bool(
            np.all(fwd_a[:mm] <= (back_a + cross_a) * (1 + 1e-12) + 1e-300)
            and np.all(fwd_b[:mm] <= (back_b + cross_b) * (1 + 1e-12) + 1e-300)
        )

    gap_rows = np.column_stack(
        [np.arange(2 * k), np.abs(h.coefficients.to_float())]
    )
    return StabilityReport(
        k=k,
        precision=run.options.precision.value,
        eps_lan=diagnostics.eps_lan,
        sigma=sigma,
        constants={"C": C_CONST, "D": D_CONST},
        moment_gaps=gaps,
        h_sup_on_grid=h.sup_norm_est,
        h_sup_on_spectrum=h_sup_spec,
        b_star_distance=b_star_distance,
        forward_alpha_err=fwd_a,
        forward_beta_err=fwd_b,
        backward_alpha_err=back_a,
        backward_beta_err=back_b,
        bound_values={
            "thm31a_rhs": bound_a_rhs,
            "thm31b_rhs": bound_b_rhs,
            "P_k": P,
        },
        flags=flags,
        moment_gap_rows=gap_rows,
    )


def problem_vesd(problem: ProblemInstance, precision=None) -> DiscreteMeasure:
    """VESD of the problem, cached on the instance (the binary64 path shares
    the instance's cached eigendecomposition)."""
    from .measures import vesd

    key = ("vesd", precision.value if precision else "work64")
    if key not in problem._cache:
        eigen = None
        if precision is None or precision is Precision.WORK64:
            eigen = problem.eigendecomposition()
        problem._cache[key] = vesd(
            problem.matrix, problem.vector, precision=precision, eigen=eigen
        )
    return problem._cache[key]
