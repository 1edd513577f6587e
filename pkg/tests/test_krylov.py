import numpy as np
import pytest

from conftest import diagonal_problem
from lanczos_lab import ensembles, krylov
from lanczos_lab._dd import DD
from lanczos_lab.lanczos import LanczosOptions, run_lanczos
from lanczos_lab.scalars import Precision


def spd_problem(rng, n):
    X = rng.standard_normal((n, 2 * n))
    A = X @ X.T / (2 * n)
    A = np.tril(A) + np.tril(A, -1).T
    spec = ensembles.EnsembleSpec(
        kind=ensembles.EnsembleKind.EXPLICIT_DIAGONAL, n=n, seed=0,
        diagonal=tuple(np.ones(n)),
    )
    problem = ensembles.ProblemInstance(A, DD(np.ones(n)), spec)
    from lanczos_lab import _backend

    return problem.with_vector(problem.vector / _backend.norm(problem.vector))


def test_identity_one_step():
    p = diagonal_problem([1.0, 1.0, 1.0], b=[1.0, 2.0, 2.0])
    run = run_lanczos(p, LanczosOptions(k=1, precision=Precision.WORK64))
    x1 = krylov.lanczos_solve(p, run, 1)
    np.testing.assert_allclose(x1, p.vector.to_float(), atol=1e-15)
    assert krylov.a_norm_error(p, x1) < 1e-14


def test_saturation_matches_dense_solve(rng):
    p = spd_problem(rng, 5)
    run = run_lanczos(p, LanczosOptions(k=5, precision=Precision.EXT128,
                                        reorthogonalize=True))
    x5 = krylov.lanczos_solve(p, run, 5)
    ref = np.linalg.solve(p.matrix, p.vector.to_float())
    assert np.max(np.abs(x5 - ref)) < 1e-12


def test_a_norm_error_trivials(rng):
    p = spd_problem(rng, 6)
    xhat = np.linalg.solve(p.matrix, p.vector.to_float())
    assert krylov.a_norm_error(p, xhat) < 1e-12
    ident = diagonal_problem([1.0] * 4, b=[1.0, 0.0, 0.0, 0.0])
    assert krylov.a_norm_error(ident, np.zeros(4)) == pytest.approx(1.0)


def test_a_norm_error_quadratic_form(rng):
    p = spd_problem(rng, 20)
    x = rng.standard_normal(20)
    xhat = np.linalg.solve(p.matrix, p.vector.to_float())
    direct = float(np.sqrt((xhat - x) @ p.matrix @ (xhat - x)))
    assert krylov.a_norm_error(p, x) == pytest.approx(direct, abs=1e-14, rel=1e-10)


def test_non_spd_rejected():
    p = diagonal_problem([1.0, -2.0, 3.0])
    with pytest.raises(ValueError):
        krylov.a_norm_error(p, np.zeros(3))


def test_indefinite_tridiagonal_names_pivot():
    p = diagonal_problem([1.0, -2.0, 3.0], b=[1.0, 1.0, 1.0])
    run = run_lanczos(p, LanczosOptions(k=3, precision=Precision.WORK64))
    with pytest.raises(ValueError, match="pivot"):
        krylov.lanczos_solve(p, run, 3)


def test_exact_arithmetic_monotone_errors(rng):
    p = spd_problem(rng, 40)
    run = run_lanczos(p, LanczosOptions(k=18, precision=Precision.EXT128,
                                        reorthogonalize=True))
    errs = [krylov.a_norm_error(p, krylov.lanczos_solve(p, run, k))
            for k in range(1, 19)]
    diffs = np.diff(errs)
    assert np.all(diffs <= 1e-12)


def test_limit_curve_decreasing():
    ks = np.arange(1, 12)
    lim = krylov.limit_curve(0.2, ks)
    assert np.all(np.diff(lim) < 0)
    assert lim[3] == pytest.approx(0.2 ** 2 / 0.8)


def test_trace_csv(tmp_path, rng):
    p = ensembles.sample_covariance(100, 0.2, seed=4, b_kind="ones")
    run = run_lanczos(p, LanczosOptions(k=10, precision=Precision.LOW32))
    trace = krylov.solve_trace(p, run, 0.2)
    path = str(tmp_path / "trace.csv")
    krylov.trace_to_csv(trace, path, "low32", 4)
    lines = open(path).read().strip().splitlines()
    assert lines[0] == "k,error,limit,precision,seed"
    assert len(lines) == len(trace.ks) + 1
