"""Orthogonal-polynomial machinery: Chebyshev families, the Stieltjes
procedure (exact-arithmetic Lanczos on measures), orthonormal/monic
evaluation, modified moments, Chebyshev connection coefficients and sup-norm
growth diagnostics.

Stieltjes on a discrete measure runs extended-precision Lanczos with full
reorthogonalization on the diagonal matrix of atoms; the named continuous
measures carry closed-form recurrence coefficients.  Inner products against
continuous measures go through Gauss rules that are exact for the integrand
degree, never adaptive quadrature, so measured moment gaps reflect Lanczos
rounding alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from ._dd import DD, as_dd
from .measures import (
    ArcsineMeasure,
    DiscreteMeasure,
    MarchenkoPasturMeasure,
    Measure,
    PerturbedMeasure,
    SemicircleMeasure,
    quadrature_measure,
)
from .spectral import JacobiMatrix


def _is_dd(x):
    return isinstance(x, DD)


def chebyshev_T(n: int, x):
    """T_n by the three-term recurrence, at the precision of the input
    (ndarray/float: binary64; DD: extended)."""
    if n < 0:
        raise ValueError("degree must be >= 0")
    one = _ones_like(x)
    if n == 0:
        return one
    prev, cur = one, x
    for _ in range(n - 1):
        prev, cur = cur, 2.0 * (x * cur) - prev
    return cur


def chebyshev_U(n: int, x):
    if n < 0:
        raise ValueError("degree must be >= 0")
    one = _ones_like(x)
    if n == 0:
        return one
    prev, cur = one, 2.0 * x
    for _ in range(n - 1):
        prev, cur = cur, 2.0 * (x * cur) - prev
    return cur


def _ones_like(x):
    if _is_dd(x):
        if isinstance(x.hi, float):
            return DD(1.0)
        return DD.ones(x.shape)
    arr = np.asarray(x, dtype=np.float64)
    return np.ones_like(arr) if arr.ndim else 1.0


def chebyshev_T_all(nmax: int, x: DD) -> list[DD]:
    """[T_0(x), ..., T_nmax(x)] in extended precision."""
    vals = [DD.ones(x.shape) if not isinstance(x.hi, float) else DD(1.0)]
    if nmax >= 1:
        vals.append(x.copy())
    for _ in range(1, nmax):
        vals.append(x * vals[-1] * 2.0 - vals[-2])
    return vals


@dataclass
class OrthoBasis:
    """Recurrence data of a measure's orthonormal polynomials.

    jacobi holds k diagonal and k-1 off-diagonal coefficients, enough to
    evaluate p_0 .. p_{k-1}; norms[n] = ||pi_n||_{L2(mu)} = beta_0 ... beta_{n-1}.
    For discrete sources, ``columns`` keeps the reorthogonalized Stieltjes
    basis (column n holds sqrt(w_i) p_n(x_i)), whose orthonormality is
    roundoff-exact by construction; evaluations at the source atoms go through
    it instead of the three-term recurrence, whose error grows with the
    polynomial sup norms at high degree.
    """

    source: Measure
    jacobi: JacobiMatrix
    norms: DD
    terminated: bool = False
    columns: Optional[DD] = None

    def __len__(self):
        return len(self.jacobi)

    @property
    def max_degree(self) -> int:
        return len(self.jacobi) - 1

    def values_at_source_atoms(self, coefficients: DD) -> DD:
        """sum_n coefficients_n p_n(x_i) at every atom of the discrete source,
        through the stored basis columns."""
        if self.columns is None:
            raise ValueError("basis has no stored columns")
        m = len(np.atleast_1d(coefficients.hi))
        cols = self.columns[:, :m]
        return _backend.matvec_dd(cols, coefficients) / self.columns[:, 0]

    def mapped_to_unit_interval(self) -> "OrthoBasis":
        """Pushforward basis under the affine map of the support to [-1,1]."""
        a, b = self.source.support()
        scale = 2.0 / (b - a)
        shift = -(a + b) / (b - a)
        J = self.jacobi.affine(scale, shift)
        return OrthoBasis(source=self.source, jacobi=J, norms=self.norms,
                          terminated=self.terminated)


def stieltjes_jacobi(mu: Measure, k: int) -> OrthoBasis:
    """Jacobi matrix of mu through degree k, in extended precision.

    Discrete measures run reorthogonalized dd Lanczos on diag(atoms) with
    b = sqrt(weights); named continuous kinds use their closed forms.  If a
    discrete measure has fewer than k atoms the basis truncates and is
    flagged terminated.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if mu.signed:
        raise ValueError("Stieltjes procedure needs a nonnegative measure")
    if isinstance(mu, DiscreteMeasure):
        if abs(mu.total_mass - 1.0) > 1e-9:
            raise ValueError("Stieltjes procedure needs a unit-mass measure")
        atoms = mu.atoms
        m_eff = min(k, len(mu))
        b = mu.weights.sqrt()
        scale = float(np.max(np.abs(atoms.hi)))
        tol = 10.0 * len(mu) * 2.0 ** -105 * max(scale, 1e-300)
        alphas, betas, Q, terminated_at = _lanczos_diag(atoms, b, m_eff, tol)
        terminated = (terminated_at is not None) or (k > len(mu))
        m = len(alphas)
        J = JacobiMatrix(alphas, betas[: m - 1])
        return OrthoBasis(source=mu, jacobi=J, norms=_norms_from(J),
                          terminated=terminated, columns=Q[:, :m])
    if isinstance(mu, SemicircleMeasure):
        mid, quarter = (mu.a + mu.b) / 2.0, (mu.b - mu.a) / 4.0
        alphas = DD(np.full(k, mid))
        betas = DD(np.full(k - 1, quarter))
        J = JacobiMatrix(alphas, betas)
        return OrthoBasis(source=mu, jacobi=J, norms=_norms_from(J))
    if isinstance(mu, ArcsineMeasure):
        mid = (mu.a + mu.b) / 2.0
        half = DD(mu.b - mu.a) / 2.0
        alphas = DD(np.full(k, mid))
        b0 = half / DD(2.0).sqrt()
        rest = half / 2.0
        b_hi = np.full(max(k - 1, 0), rest.hi)
        b_lo = np.full(max(k - 1, 0), rest.lo)
        if k > 1:
            b_hi[0], b_lo[0] = b0.hi, b0.lo
        J = JacobiMatrix(alphas, DD.of(b_hi, b_lo))
        return OrthoBasis(source=mu, jacobi=J, norms=_norms_from(J))
    if isinstance(mu, MarchenkoPasturMeasure):
        d = mu.d
        a_hi = np.full(k, 1.0 + d)
        a_hi[0] = 1.0
        rd = DD(d).sqrt()
        betas = DD.of(np.full(k - 1, rd.hi), np.full(k - 1, rd.lo))
        J = JacobiMatrix(DD(a_hi), betas)
        return OrthoBasis(source=mu, jacobi=J, norms=_norms_from(J))
    raise NotImplementedError(f"no Stieltjes routine for {type(mu).__name__}")


def _lanczos_diag(atoms: DD, b: DD, k: int, tol: float):
    from .lanczos import lanczos_on_operator

    def matvec(v: DD) -> DD:
        return v * atoms

    return lanczos_on_operator(matvec, b, k, reorthogonalize=True, tol=tol)


def _norms_from(J: JacobiMatrix) -> DD:
    k = len(J)
    hi = np.empty(k)
    lo = np.empty(k)
    acc = DD(1.0)
    hi[0], lo[0] = 1.0, 0.0
    for i in range(1, k):
        acc = acc * J.betas[i - 1]
        hi[i], lo[i] = acc.hi, acc.lo
    return DD.of(hi, lo)


def eval_orthonormal_all(basis: OrthoBasis, nmax: int, x) -> list[DD]:
    """[p_0(x), ..., p_nmax(x)] in extended precision."""
    if nmax > basis.max_degree:
        raise ValueError(
            f"degree {nmax} beyond basis (max {basis.max_degree})"
        )
    x = as_dd(x)
    alphas, betas = basis.jacobi.alphas, basis.jacobi.betas
    p0 = DD.ones(x.shape) if not isinstance(x.hi, float) else DD(1.0)
    vals = [p0]
    if nmax == 0:
        return vals
    prev = None
    cur = p0
    for n in range(nmax):
        nxt = (x - alphas[n]) * cur
        if n > 0:
            nxt = nxt - prev * betas[n - 1]
        nxt = nxt / betas[n]
        vals.append(nxt)
        prev, cur = cur, nxt
    return vals


def eval_orthonormal(basis: OrthoBasis, n: int, x) -> DD:
    return eval_orthonormal_all(basis, n, x)[n]


def eval_monic(basis: OrthoBasis, n: int, x) -> DD:
    """pi_n(x) by the monic recurrence pi_{n+1} = (x-a_n) pi_n - b_{n-1}^2 pi_{n-1}."""
    if n > basis.max_degree:
        raise ValueError(f"degree {n} beyond basis (max {basis.max_degree})")
    x = as_dd(x)
    alphas, betas = basis.jacobi.alphas, basis.jacobi.betas
    cur = DD.ones(x.shape) if not isinstance(x.hi, float) else DD(1.0)
    if n == 0:
        return cur
    prev = None
    for i in range(n):
        nxt = (x - alphas[i]) * cur
        if i > 0:
            b = betas[i - 1]
            nxt = nxt - prev * (b * b)
        prev, cur = cur, nxt
    return cur


@dataclass
class ModifiedMoments:
    reference: Measure
    target: Measure
    values: DD  # m_0 .. m_{count-1}

    def __len__(self):
        return len(self.values)


def gauss_rule(nu: Measure, m: int) -> DiscreteMeasure:
    """m-point Gauss rule of a continuous measure, exact for degree <= 2m-1,
    with double-double nodes and weights."""
    if isinstance(nu, SemicircleMeasure):
        y, w = _gauss_chebyshev_u_dd(m)
        half = DD(nu.b - nu.a) / 2.0
        mid = (nu.a + nu.b) / 2.0
        return DiscreteMeasure(y * half + mid, w)
    if isinstance(nu, ArcsineMeasure):
        y, w = _gauss_chebyshev_t_dd(m)
        half = DD(nu.b - nu.a) / 2.0
        mid = (nu.a + nu.b) / 2.0
        return DiscreteMeasure(y * half + mid, w)
    if isinstance(nu, MarchenkoPasturMeasure):
        basis = stieltjes_jacobi(nu, m)
        return quadrature_measure(basis.jacobi)
    if isinstance(nu, PerturbedMeasure):
        extra = nu.h_degree
        base = gauss_rule(nu.base, m + (extra + 1) // 2 + 1)
        factors = 1.0 + nu.h(base.atoms)
        return base.reweighted(factors, signed=nu.signed)
    raise NotImplementedError(f"no Gauss rule for {type(nu).__name__}")


def _newton_refine(x0: np.ndarray, poly_pair) -> DD:
    """Two dd Newton steps from binary64 seeds; poly_pair(x) -> (f(x), f'(x))."""
    x = DD(x0)
    for _ in range(2):
        f, fp = poly_pair(x)
        x = x - f / fp
    return x


def _cheb_with_derivative(kind: str, n: int, x: DD):
    one = DD.ones(x.shape)
    zero = DD.zeros(x.shape)
    if kind == "T":
        p_prev, p_cur = one, x.copy()
        d_prev, d_cur = zero, one.copy()
    else:
        p_prev, p_cur = one, x * 2.0
        d_prev, d_cur = zero, DD.of(np.full(x.shape, 2.0), np.zeros(x.shape))
    for _ in range(n - 1):
        p_nxt = x * p_cur * 2.0 - p_prev
        d_nxt = p_cur * 2.0 + x * d_cur * 2.0 - d_prev
        p_prev, p_cur = p_cur, p_nxt
        d_prev, d_cur = d_cur, d_nxt
    return p_cur, d_cur


def _gauss_chebyshev_u_dd(m: int):
    """Nodes/weights of the m-point rule for the unit semicircle measure."""
    j = np.arange(1, m + 1)
    seeds = np.cos(j * np.pi / (m + 1.0))
    x = _newton_refine(seeds, lambda t: _cheb_with_derivative("U", m, t))
    w = (1.0 - x * x) * (DD(2.0) / float(m + 1))  # 2/(m+1) exactly, in dd
    return x, w


def _gauss_chebyshev_t_dd(m: int):
    """Nodes/weights of the m-point rule for the unit arcsine measure."""
    j = np.arange(1, m + 1)
    seeds = np.cos((2.0 * j - 1.0) * np.pi / (2.0 * m))
    x = _newton_refine(seeds, lambda t: _cheb_with_derivative("T", m, t))
    unit = DD(1.0) / float(m)  # 1/m exactly, in dd
    w = DD.of(np.full(m, unit.hi), np.full(m, unit.lo))
    return x, w


def modified_moments(nu: Measure, basis: OrthoBasis, count: int) -> ModifiedMoments:
    """m_n = integral of p_n(.; mu) against nu for n < count, in extended
    precision; discrete nu by exact atom sums, continuous nu through a Gauss
    rule exact for the integrand degree.  Signed nu is allowed."""
    if count > len(basis.jacobi):
        raise ValueError(
            f"count {count} beyond the basis length {len(basis.jacobi)}"
        )
    if not isinstance(nu, DiscreteMeasure):
        rule_points = (count + 1) // 2 + 1
        nu_disc = gauss_rule(nu, rule_points)
    else:
        nu_disc = nu
    if basis.columns is not None and _same_atoms(nu_disc, basis.source):
        # measures living on the source atoms integrate through the stored
        # columns: m_n = sum_i q_n[i] (nu_i / sqrt(w_i)), q_0[i] = sqrt(w_i)
        scale = nu_disc.weights / basis.columns[:, 0]
        vals = _backend.gramt(basis.columns[:, :count], scale)
        return ModifiedMoments(reference=basis.source, target=nu, values=vals)
    vals = eval_orthonormal_all(basis, count - 1, nu_disc.atoms)
    hi = np.empty(count)
    lo = np.empty(count)
    for n, pn in enumerate(vals):
        m = _backend.dot(pn, nu_disc.weights)
        hi[n], lo[n] = m.hi, m.lo
    return ModifiedMoments(reference=basis.source, target=nu, values=DD.of(hi, lo))


def _same_atoms(nu: Measure, mu: Measure) -> bool:
    return (
        isinstance(nu, DiscreteMeasure)
        and isinstance(mu, DiscreteMeasure)
        and len(nu) == len(mu)
        and np.array_equal(nu.atoms.hi, mu.atoms.hi)
        and np.array_equal(nu.atoms.lo, mu.atoms.lo)
    )


def moment_gap(nu1: Measure, nu2: Measure, basis: OrthoBasis, count: int) -> float:
    """max_n |m_n(nu1) - m_n(nu2)| over n < count."""
    m1 = modified_moments(nu1, basis, count).values
    m2 = modified_moments(nu2, basis, count).values
    return float(np.max(np.abs((m1 - m2).to_float())))


def chebyshev_connection(basis: OrthoBasis, n: int) -> DD:
    """Coefficients c_{n,0..n} with p_n = sum_i c_{n,i} T_i, from the exact
    Gauss-Chebyshev rule of degree 2n+1 (basis support inside [-1,1])."""
    if n > basis.max_degree:
        raise ValueError(f"degree {n} beyond basis (max {basis.max_degree})")
    m = n + 1
    x, w = _gauss_chebyshev_t_dd(m)
    pn = eval_orthonormal(basis, n, x)
    tvals = chebyshev_T_all(n, x)
    hi = np.empty(n + 1)
    lo = np.empty(n + 1)
    for i in range(n + 1):
        c = _backend.dot(pn * tvals[i], w)
        if i > 0:
            c = c * 2.0
        hi[i], lo[i] = c.hi, c.lo
    return DD.of(hi, lo)


def _chebyshev_grid(npts: int, a: float, b: float) -> np.ndarray:
    theta = (2.0 * np.arange(1, npts + 1) - 1.0) * np.pi / (2.0 * npts)
    x = np.cos(theta) * (b - a) / 2.0 + (a + b) / 2.0
    return np.concatenate([[a], x, [b]])


def sup_norm(basis: OrthoBasis, n: int, interval=(-1.0, 1.0)) -> float:
    """max |p_n| over a Chebyshev grid of 8n+9 points plus the endpoints of
    the interval; a lower estimate of the true sup, tight to a factor 2 by
    the Bernstein-extension argument."""
    return float(sup_norm_all(basis, n, interval)[n])


def sup_norm_all(basis: OrthoBasis, nmax: int, interval=(-1.0, 1.0)) -> np.ndarray:
    a, b = float(interval[0]), float(interval[1])
    grid = DD(_chebyshev_grid(8 * max(nmax, 1) + 9, a, b))
    vals = eval_orthonormal_all(basis, nmax, grid)
    return np.array([float(np.max(np.abs(v.to_float()))) for v in vals])


def op_max(basis: OrthoBasis, k: int, interval=(-1.0, 1.0)) -> float:
    """P_k estimate: max_{n <= 2k-1} sup |p_n| over the interval."""
    nmax = min(2 * k - 1, basis.max_degree)
    return float(np.max(sup_norm_all(basis, nmax, interval)))


def associated_poly_sum(f_values, x):
    """d_n(x) = U_{n-1}(x) f_0 + 2 sum_{i=2..n} U_{n-i}(x) f_{i-1}
    (closed form of the inhomogeneous Chebyshev recurrence)."""
    f = list(f_values)
    n = len(f)
    if n == 0:
        return DD(0.0) * as_dd(x) if _is_dd(x) else np.zeros_like(np.asarray(x, float))
    x_dd = as_dd(x)
    total = chebyshev_U(n - 1, x_dd) * f[0]
    for i in range(2, n + 1):
        total = total + chebyshev_U(n - i, x_dd) * f[i - 1] * 2.0
    return total


def associated_poly_recurrence(f_values, x):
    """Direct evaluation of d_0 = 0, d_1 = f_0,
    d_n = 2 x d_{n-1} - d_{n-2} + 2 f_{n-1}; the oracle for the closed form."""
    f = list(f_values)
    n = len(f)
    x_dd = as_dd(x)
    zero = DD.zeros(x_dd.shape) if not isinstance(x_dd.hi, float) else DD(0.0)
    if n == 0:
        return zero
    d_prev = zero
    d_cur = zero + f[0]
    for i in range(2, n + 1):
        d_prev, d_cur = d_cur, x_dd * d_cur * 2.0 - d_prev + 2.0 * as_dd(f[i - 1])
    return d_cur
