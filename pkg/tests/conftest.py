import numpy as np
import pytest

from lanczos_lab import ensembles
from lanczos_lab._dd import DD


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def random_discrete(rng, natoms, lo=-1.0, hi=1.0):
    """Unit-mass discrete measure with distinct atoms in [lo, hi]."""
    from lanczos_lab.measures import DiscreteMeasure

    atoms = np.sort(rng.uniform(lo, hi, natoms))
    while np.any(np.diff(atoms) == 0):
        atoms = np.sort(rng.uniform(lo, hi, natoms))
    w = rng.uniform(0.1, 1.0, natoms)
    w = w / w.sum()
    wd = DD(w)
    wd = wd / wd.sum()
    return DiscreteMeasure(DD(atoms), wd)


def diagonal_problem(values, b=None):
    values = tuple(float(v) for v in values)
    spec = ensembles.EnsembleSpec(
        kind=ensembles.EnsembleKind.EXPLICIT_DIAGONAL,
        n=len(values),
        seed=0,
        diagonal=values,
    )
    problem = ensembles.generate(spec)
    if b is not None:
        from lanczos_lab import _backend

        bd = DD(np.asarray(b, dtype=np.float64))
        problem = problem.with_vector(bd / _backend.norm(bd))
    return problem
