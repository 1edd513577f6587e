"""Probability measures on an interval: discrete spectral measures, the named
continuous references (semicircle, arcsine, Marchenko-Pastur), relative
perturbations of those, Kolmogorov-Smirnov distance and Stieltjes transforms.

Continuous kinds are symbolic (closed-form density/CDF/transform); they are
discretized only through exact Gauss rules when a computation needs atoms.
Discrete kinds carry double-double atoms and weights so that quadrature-level
identities hold to extended roundoff.
"""

from __future__ import annotations

import json
import numpy as np

from . import spectral
from ._dd import DD, as_dd

_MERGE_TOL_FACTOR = 100.0 * 2.0 ** -105  # 100 u(Ext128)


class Measure:
    signed = False
    is_discrete = False

    @property
    def total_mass(self) -> float:
        raise NotImplementedError

    def support(self):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def interval_mass(self, x, y) -> float:
        """Mass of the closed interval [x, y]."""
        if x > y:
            raise ValueError("interval_mass needs x <= y")
        return float(self.cdf(y) - self._cdf_left(x))

    def _cdf_left(self, x):
        return self.cdf(x)

    def stieltjes(self, z: complex) -> complex:
        raise NotImplementedError

    def density(self, x):
        raise NotImplementedError

    def to_record(self) -> str:
        raise NotImplementedError


class DiscreteMeasure(Measure):
    is_discrete = True

    def __init__(self, atoms, weights, signed: bool = False):
        atoms = as_dd(atoms)
        weights = as_dd(weights)
        order = np.argsort(atoms.hi, kind="stable")
        self.atoms = DD.of(
            np.atleast_1d(atoms.hi)[order], np.atleast_1d(atoms.lo)[order]
        )
        self.weights = DD.of(
            np.atleast_1d(weights.hi)[order], np.atleast_1d(weights.lo)[order]
        )
        if not signed and np.any(self.weights.hi < 0):
            raise ValueError("negative weights require the signed flag")
        self.signed = signed
        self._cum = np.cumsum(self.weights.to_float())

    def __len__(self):
        return len(self.atoms)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def support(self):
        return float(self.atoms.hi[0]), float(self.atoms.hi[-1])

    def cdf(self, x):
        idx = np.searchsorted(self.atoms.hi, x, side="right")
        cum = np.concatenate([[0.0], self._cum])
        return cum[idx]

    def _cdf_left(self, x):
        idx = np.searchsorted(self.atoms.hi, x, side="left")
        cum = np.concatenate([[0.0], self._cum])
        return cum[idx]

    def stieltjes(self, z: complex) -> complex:
        z = complex(z)
        atoms = self.atoms.to_float()
        if z.imag == 0.0 and np.any(atoms == z.real):
            raise ValueError("z lies on an atom of the measure")
        w = self.weights.to_float()
        return complex(np.sum(w / (atoms - z)))

    def merged(self, tol: float) -> "DiscreteMeasure":
        """Merge clusters of atoms closer than tol (sum weights, weight-averaged
        positions) and drop exactly-zero weights."""
        hi = self.atoms.hi
        groups = []
        start = 0
        for i in range(1, len(hi) + 1):
            if i == len(hi) or hi[i] - hi[i - 1] > tol:
                groups.append((start, i))
                start = i
        new_atoms = []
        new_weights = []
        for a, b in groups:
            w = self.weights[a:b].sum()
            if float(w) == 0.0:
                if b - a == 1 and float(self.weights[a]) == 0.0:
                    continue
                pos = self.atoms[a:b].sum() / (b - a)
            else:
                pos = (self.atoms[a:b] * self.weights[a:b]).sum() / w
            new_atoms.append(pos)
            new_weights.append(w)
        return DiscreteMeasure(
            DD.of(
                np.array([p.hi for p in new_atoms]),
                np.array([p.lo for p in new_atoms]),
            ),
            DD.of(
                np.array([w.hi for w in new_weights]),
                np.array([w.lo for w in new_weights]),
            ),
            signed=self.signed,
        )

    def reweighted(self, factors: DD, signed: bool) -> "DiscreteMeasure":
        return DiscreteMeasure(self.atoms, self.weights * factors, signed=signed)

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("position,weight\n")
            a = self.atoms.to_float()
            w = self.weights.to_float()
            for i in range(len(a)):
                fh.write(f"{a[i]!r},{w[i]!r}\n")

    def to_record(self) -> str:
        return json.dumps({"kind": "discrete", "size": len(self)})


class SemicircleMeasure(Measure):
    """Density 2/pi sqrt(1-t^2) under the affine map of [a,b] to [-1,1]."""

    def __init__(self, a: float = -1.0, b: float = 1.0):
        if not b > a:
            raise ValueError("need b > a")
        self.a = float(a)
        self.b = float(b)

    total_mass = 1.0

    def support(self):
        return self.a, self.b

    def _std(self, x):
        return (2.0 * np.asarray(x, dtype=np.float64) - (self.a + self.b)) / (
            self.b - self.a
        )

    def density(self, x):
        t = self._std(x)
        inside = np.abs(t) <= 1.0
        val = np.where(inside, (2.0 / np.pi) * np.sqrt(np.maximum(1 - t * t, 0)), 0.0)
        return val * (2.0 / (self.b - self.a))

    def cdf(self, x):
        t = np.clip(self._std(x), -1.0, 1.0)
        return 0.5 + (t * np.sqrt(1 - t * t) + np.arcsin(t)) / np.pi

    def stieltjes(self, z: complex) -> complex:
        z = complex(z)
        if z.imag == 0.0 and self.a <= z.real <= self.b:
            raise ValueError("z lies on the support")
        t = (2.0 * z - (self.a + self.b)) / (self.b - self.a)
        s = -2.0 / (t + np.sqrt(t - 1.0 + 0j) * np.sqrt(t + 1.0 + 0j))
        return complex(s * 2.0 / (self.b - self.a))

    def to_record(self) -> str:
        return json.dumps({"kind": "semicircle", "a": self.a, "b": self.b})


class ArcsineMeasure(Measure):
    """Density (1/pi)/sqrt(1-t^2) under the affine map of [a,b] to [-1,1]."""

    def __init__(self, a: float = -1.0, b: float = 1.0):
        if not b > a:
            raise ValueError("need b > a")
        self.a = float(a)
        self.b = float(b)

    total_mass = 1.0

    def support(self):
        return self.a, self.b

    def _std(self, x):
        return (2.0 * np.asarray(x, dtype=np.float64) - (self.a + self.b)) / (
            self.b - self.a
        )

    def density(self, x):
        t = self._std(x)
        with np.errstate(divide="ignore"):
            val = np.where(
                np.abs(t) < 1.0, (1.0 / np.pi) / np.sqrt(np.maximum(1 - t * t, 1e-300)), np.inf
            )
        return val * (2.0 / (self.b - self.a))

    def cdf(self, x):
        t = np.clip(self._std(x), -1.0, 1.0)
        return 0.5 + np.arcsin(t) / np.pi

    def stieltjes(self, z: complex) -> complex:
        z = complex(z)
        if z.imag == 0.0 and self.a <= z.real <= self.b:
            raise ValueError("z lies on the support")
        t = (2.0 * z - (self.a + self.b)) / (self.b - self.a)
        s = -1.0 / (np.sqrt(t - 1.0 + 0j) * np.sqrt(t + 1.0 + 0j))
        return complex(s * 2.0 / (self.b - self.a))

    def to_record(self) -> str:
        return json.dumps({"kind": "arcsine", "a": self.a, "b": self.b})


class MarchenkoPasturMeasure(Measure):
    """Aspect ratio d in (0,1); support [(1-sqrt(d))^2, (1+sqrt(d))^2],
    density sqrt((l+ - x)(x - l-)) / (2 pi d x)."""

    def __init__(self, d: float):
        if not 0.0 < d < 1.0:
            raise ValueError("Marchenko-Pastur ratio d must be in (0,1)")
        self.d = float(d)
        rd = np.sqrt(self.d)
        self.lam_minus = (1.0 - rd) ** 2
        self.lam_plus = (1.0 + rd) ** 2

    total_mass = 1.0

    def support(self):
        return self.lam_minus, self.lam_plus

    def density(self, x):
        x = np.asarray(x, dtype=np.float64)
        inside = (x >= self.lam_minus) & (x <= self.lam_plus)
        num = np.sqrt(np.maximum((self.lam_plus - x) * (x - self.lam_minus), 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(inside, num / (2 * np.pi * self.d * np.maximum(x, 1e-300)), 0.0)
        return val

    def cdf(self, x):
        d = self.d
        x = np.clip(np.asarray(x, dtype=np.float64), self.lam_minus, self.lam_plus)
        phi = np.arcsin(np.clip((x - 1 - d) / (2 * np.sqrt(d)), -1.0, 1.0))

        def g(p):
            t = np.tan(p / 2.0)
            return (2.0 / np.pi) * (
                np.cos(p) / (2 * np.sqrt(d))
                + (1 + d) / (4 * d) * p
                - (1 - d) / (2 * d) * np.arctan(((1 + d) * t + 2 * np.sqrt(d)) / (1 - d))
            )

        return g(phi) - g(-np.pi / 2.0)

    def stieltjes(self, z: complex) -> complex:
        z = complex(z)
        if z.imag == 0.0 and self.lam_minus <= z.real <= self.lam_plus:
            raise ValueError("z lies on the support")
        R = np.sqrt(z - self.lam_minus + 0j) * np.sqrt(z - self.lam_plus + 0j)
        return complex(2.0 / ((1.0 - self.d) - z - R))

    def to_record(self) -> str:
        return json.dumps({"kind": "marchenko-pastur", "d": self.d})


class PerturbedMeasure(Measure):
    """(1 + h(x)) times a continuous base measure; possibly signed.

    h evaluates in extended precision (a PerturbationFunction or any callable
    DD -> DD of known polynomial degree).  Only moment computations are
    supported; CDF/KS are rejected (signed-measure semantics).
    """

    def __init__(self, base: Measure, h, h_degree: int, signed: bool):
        if base.is_discrete:
            raise ValueError("PerturbedMeasure wraps continuous bases only")
        self.base = base
        self.h = h
        self.h_degree = int(h_degree)
        self.signed = bool(signed)

    @property
    def total_mass(self) -> float:
        return 1.0  # int h dmu = 0: h has zero mean against the base

    def support(self):
        return self.base.support()

    def density(self, x):
        hx = self.h(DD(np.asarray(x, dtype=np.float64)))
        return self.base.density(x) * (1.0 + hx.to_float())

    def to_record(self) -> str:
        return json.dumps(
            {
                "kind": "perturbed",
                "base": json.loads(self.base.to_record()),
                "h_degree": self.h_degree,
                "signed": self.signed,
            }
        )


def vesd(A: np.ndarray, b, precision=None, eigen=None) -> DiscreteMeasure:
    """Spectral measure of (A, b): mass (b^T u_n)^2 at each eigenvalue.

    precision WORK64 (default) uses the binary64 dense eigensolver (or the
    cached pair passed as ``eigen``); EXT128 tridiagonalizes by Householder
    reflections in double-double so that the atoms and weights are
    quadrature-grade (small n only).
    """
    from .scalars import Precision

    b = as_dd(b)
    if precision is None or precision is Precision.WORK64:
        values, vectors = eigen if eigen is not None else \
            spectral.dense_symmetric_eigen(A)
        proj = vectors.T @ b.to_float()
        atoms = DD(values)
        weights = DD(proj) * DD(proj)
    elif precision is Precision.EXT128:
        diag, off, c = spectral.householder_tridiag_dd(np.asarray(A, float), b)
        n = len(diag)
        rows = DD.of(
            np.atleast_2d(c.hi.copy()), np.atleast_2d(c.lo.copy())
        )
        values, acc = spectral.tridiag_eigen_rows(diag, off, rows)
        atoms = values
        comp = acc[0]
        weights = comp * comp
    else:
        raise ValueError("vesd supports WORK64 or EXT128")
    scale = float(np.max(np.abs(atoms.hi))) if len(atoms.hi) else 1.0
    mu = DiscreteMeasure(atoms, weights).merged(_MERGE_TOL_FACTOR * max(scale, 1e-300))
    # sum (b^T u)^2 = ||b||^2 = 1 defines the measure; renormalizing removes
    # the orthonormality error of the binary64 eigenvectors (~1e-14)
    return DiscreteMeasure(mu.atoms, mu.weights / mu.weights.sum())


def quadrature_measure(J) -> DiscreteMeasure:
    """k-point Gauss rule of the measure behind the Jacobi matrix: atoms at the
    Ritz values, weights the squared first eigenvector components."""
    eig = spectral.tridiag_eigen(J)
    scale = float(np.max(np.abs(eig.values.hi)))
    mu = DiscreteMeasure(eig.values, eig.weights)
    return mu.merged(_MERGE_TOL_FACTOR * max(scale, 1e-300))


def _require_probability(nu: Measure, what: str):
    if nu.signed:
        raise ValueError(f"{what} rejects signed measures")
    if abs(nu.total_mass - 1.0) > 1e-9:
        raise ValueError(f"{what} needs unit-mass measures")


def ks_distance(nu1: Measure, nu2: Measure) -> float:
    """sup_x |F1(x) - F2(x)|, exact over atoms and their left limits."""
    _require_probability(nu1, "ks_distance")
    _require_probability(nu2, "ks_distance")
    if nu1.is_discrete and nu2.is_discrete:
        pos = np.union1d(nu1.atoms.to_float(), nu2.atoms.to_float())
        right = np.abs(nu1.cdf(pos) - nu2.cdf(pos))
        left = np.abs(nu1._cdf_left(pos) - nu2._cdf_left(pos))
        return float(max(right.max(), left.max()))
    if nu2.is_discrete:
        nu1, nu2 = nu2, nu1
    if not nu1.is_discrete:
        raise NotImplementedError("continuous-continuous KS distance not supported")
    pos = nu1.atoms.to_float()
    cont = nu2.cdf(pos)
    right = np.abs(nu1.cdf(pos) - cont)
    left = np.abs(nu1._cdf_left(pos) - cont)
    return float(max(right.max(), left.max()))


def stieltjes_transform(nu: Measure, z: complex) -> complex:
    """S(z) = integral of 1/(x - z) against nu."""
    return nu.stieltjes(z)


def cdf(nu: Measure, x):
    return nu.cdf(x)


def interval_mass(nu: Measure, x, y) -> float:
    return nu.interval_mass(x, y)
