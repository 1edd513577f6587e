"""Seeded random inputs: GOE/Wigner matrices, sample-covariance matrices,
and unit starting vectors.

Randomness comes from numpy's PCG64 counter generator seeded per instance;
normals are produced by an explicit Box-Muller transform on its uniforms, so
every draw is reproducible in-language from the 64-bit seed.  Matrices are
stored exactly symmetric; starting vectors are normalized in extended
precision and kept as double-double pairs.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _backend, spectral
from ._dd import DD


class EnsembleKind(enum.Enum):
    GOE = "goe"
    WIGNER_GENERIC = "wigner-generic"
    COVARIANCE_GAUSSIAN = "covariance-gaussian"
    COVARIANCE_RADEMACHER = "covariance-rademacher"
    EXPLICIT_DIAGONAL = "explicit-diagonal"


@dataclass(frozen=True)
class EnsembleSpec:
    kind: EnsembleKind
    n: int
    seed: int
    aspect_d: Optional[float] = None  # N/M ratio in (0,1) for covariance kinds
    b_kind: str = "gaussian"  # "gaussian" or "ones"
    diagonal: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension n must be >= 1")
        if self.kind in (
            EnsembleKind.COVARIANCE_GAUSSIAN,
            EnsembleKind.COVARIANCE_RADEMACHER,
        ):
            if self.aspect_d is None or not (0.0 < self.aspect_d < 1.0):
                raise ValueError("d must be in (0,1) for covariance ensembles")
        if self.kind is EnsembleKind.EXPLICIT_DIAGONAL and self.diagonal is None:
            raise ValueError("explicit-diagonal ensemble needs diagonal values")


def _box_muller_normals(rng: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals via Box-Muller on PCG64 uniforms."""
    pairs = (size + 1) // 2
    u1 = rng.random(pairs)
    u2 = rng.random(pairs)
    r = np.sqrt(-2.0 * np.log1p(-u1))  # u1 in [0,1) => 1-u1 in (0,1]
    theta = 2.0 * np.pi * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
    return z[:size]


class ProblemInstance:
    """Immutable (A, b) pair: exactly symmetric matrix, extended-precision
    unit starting vector, plus lazily cached spectral data shared by the
    diagnostics."""

    def __init__(self, matrix: np.ndarray, vector: DD, spec: EnsembleSpec):
        self.matrix = matrix
        self.vector = vector
        self.spec = spec
        self._cache: dict = {}

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def matvec_ext(self, x: DD) -> DD:
        return _backend.matvec(self.matrix, x)

    # -- cached spectral data ------------------------------------------
    def eigenvalues(self) -> np.ndarray:
        if "eigvals" not in self._cache:
            if "eigh" in self._cache:
                self._cache["eigvals"] = self._cache["eigh"][0]
            else:
                self._cache["eigvals"] = scipy_eigvalsh(self.matrix)
        return self._cache["eigvals"]

    def eigendecomposition(self):
        if "eigh" not in self._cache:
            self._cache["eigh"] = spectral.dense_symmetric_eigen(self.matrix)
        return self._cache["eigh"]

    def norm_estimate(self) -> float:
        if "norm" not in self._cache:
            self._cache["norm"] = spectral.operator_norm_estimate(
                self.matvec_ext, self.n
            )
        return self._cache["norm"]

    def with_vector(self, vector: DD) -> "ProblemInstance":
        """Same matrix, different starting vector; spectral caches carry over."""
        other = ProblemInstance(self.matrix, vector, self.spec)
        other._cache = self._cache
        return other


def scipy_eigvalsh(A):
    import scipy.linalg

    return scipy.linalg.eigvalsh(A)


def _unit_vector(rng: np.random.Generator, n: int, b_kind: str) -> DD:
    if b_kind == "ones":
        raw = np.ones(n)
    elif b_kind in ("gaussian", "random"):
        raw = _box_muller_normals(rng, n)
        if not np.any(raw):
            raw = np.ones(n)
    else:
        raise ValueError(f"unknown b_kind {b_kind!r}")
    b = DD(raw)
    return b / _backend.norm(b)


def generate(spec: EnsembleSpec) -> ProblemInstance:
    rng = np.random.default_rng(np.random.PCG64(spec.seed))
    n = spec.n
    kind = spec.kind
    if kind is EnsembleKind.GOE:
        X = _box_muller_normals(rng, n * n).reshape(n, n)
        A = (X + X.T) / (2.0 * np.sqrt(2.0 * n))
    elif kind is EnsembleKind.WIGNER_GENERIC:
        X = _box_muller_normals(rng, n * n).reshape(n, n)
        A = np.triu(X, 1)
        A = (A + A.T + np.diag(np.diagonal(X))) / (2.0 * np.sqrt(n))
    elif kind in (EnsembleKind.COVARIANCE_GAUSSIAN, EnsembleKind.COVARIANCE_RADEMACHER):
        m = int(round(n / spec.aspect_d))
        if kind is EnsembleKind.COVARIANCE_GAUSSIAN:
            X = _box_muller_normals(rng, n * m).reshape(n, m)
        else:
            X = (2.0 * rng.integers(0, 2, size=(n, m)) - 1.0).astype(np.float64)
        A = X @ X.T / m
        A = np.tril(A) + np.tril(A, -1).T  # exact symmetry from lower triangle
    elif kind is EnsembleKind.EXPLICIT_DIAGONAL:
        A = np.diag(np.asarray(spec.diagonal, dtype=np.float64))
    else:
        raise ValueError(f"unhandled ensemble kind {kind}")
    b = _unit_vector(rng, n, spec.b_kind)
    return ProblemInstance(A, b, spec)


def sample_goe(n: int, seed: int) -> ProblemInstance:
    """GOE matrix (X + X^T) / (2 sqrt(2N)) with an independent unit vector."""
    return generate(EnsembleSpec(kind=EnsembleKind.GOE, n=n, seed=seed))


def sample_covariance(
    n: int,
    d: float,
    seed: int,
    entry_dist: str = "gaussian",
    b_kind: str = "ones",
) -> ProblemInstance:
    """Sample covariance X X^T / M with X of shape N x M, M = round(N/d).

    Normalizing by the sample count M puts the limiting spectrum on
    [(1-sqrt(d))^2, (1+sqrt(d))^2] for d = N/M in (0,1).  ``entry_dist`` is
    "gaussian" or "rademacher"; b defaults to the all-ones direction.
    """
    kinds = {
        "gaussian": EnsembleKind.COVARIANCE_GAUSSIAN,
        "rademacher": EnsembleKind.COVARIANCE_RADEMACHER,
    }
    try:
        kind = kinds[entry_dist.lower()]
    except KeyError:
        raise ValueError(f"entry_dist must be gaussian or rademacher, got {entry_dist!r}")
    return generate(
        EnsembleSpec(kind=kind, n=n, seed=seed, aspect_d=d, b_kind=b_kind)
    )


# -- serialization -----------------------------------------------------


def save_instance(problem: ProblemInstance, path: str) -> None:
    """Dump A (row-major lower triangle), b (hi/lo pair) and the spec."""
    n = problem.n
    tril = problem.matrix[np.tril_indices(n)]
    spec = problem.spec
    np.savez(
        path,
        tril=tril,
        b_hi=np.atleast_1d(problem.vector.hi),
        b_lo=np.atleast_1d(problem.vector.lo),
        spec=json.dumps(
            {
                "kind": spec.kind.value,
                "n": spec.n,
                "seed": spec.seed,
                "aspect_d": spec.aspect_d,
                "b_kind": spec.b_kind,
                "diagonal": list(spec.diagonal) if spec.diagonal else None,
            }
        ),
    )


def load_instance(path: str) -> ProblemInstance:
    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["spec"]))
    n = meta["n"]
    A = np.zeros((n, n))
    A[np.tril_indices(n)] = data["tril"]
    A = A + np.tril(A, -1).T
    spec = EnsembleSpec(
        kind=EnsembleKind(meta["kind"]),
        n=n,
        seed=meta["seed"],
        aspect_d=meta["aspect_d"],
        b_kind=meta["b_kind"],
        diagonal=tuple(meta["diagonal"]) if meta["diagonal"] else None,
    )
    return ProblemInstance(A, DD.of(data["b_hi"], data["b_lo"]), spec)
