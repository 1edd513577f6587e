import numpy as np
import pytest

from lanczos_lab import _backend, ensembles
from lanczos_lab.ensembles import EnsembleKind, EnsembleSpec


def test_seed_determinism():
    a = ensembles.sample_goe(50, seed=42)
    b = ensembles.sample_goe(50, seed=42)
    assert np.array_equal(a.matrix, b.matrix)
    assert np.array_equal(a.vector.hi, b.vector.hi)
    c = ensembles.sample_goe(50, seed=43)
    assert not np.array_equal(a.matrix, c.matrix)


def test_goe_exact_symmetry():
    p = ensembles.sample_goe(80, seed=1)
    assert np.array_equal(p.matrix, p.matrix.T)


def test_goe_n1_second_moment():
    # A = X00 / sqrt(2) for n=1, so E[A^2] = 1/2
    vals = np.array(
        [float(ensembles.sample_goe(1, seed=s).matrix[0, 0]) for s in range(800)]
    )
    second = np.mean(vals ** 2)
    sem = np.std(vals ** 2) / np.sqrt(len(vals))
    assert abs(second - 0.5) < 5 * sem


def test_unit_vector_extended_norm():
    p = ensembles.sample_goe(300, seed=9)
    nb = _backend.norm(p.vector)
    assert abs(float(nb) - 1.0) < 1e-30


def test_goe_lambda_max_band():
    for seed in (1, 2, 3):
        p = ensembles.sample_goe(2000, seed)
        lam = p.eigenvalues()
        assert 0.95 <= lam[-1] <= 1.10


def test_covariance_shapes_and_psd():
    p = ensembles.sample_covariance(60, 0.3, seed=2)
    assert p.matrix.shape == (60, 60)
    assert np.array_equal(p.matrix, p.matrix.T)
    lam = p.eigenvalues()
    norm = np.abs(lam).max()
    assert lam[0] >= -60 * 2.0 ** -53 * norm


def test_covariance_n1_is_mean_of_squares():
    # n=1, M=5: A is the mean of 5 squared iid normals
    p = ensembles.sample_covariance(1, 0.2, seed=7, b_kind="random")
    assert p.matrix.shape == (1, 1)
    vals = [
        float(ensembles.sample_covariance(1, 0.2, seed=s).matrix[0, 0])
        for s in range(400)
    ]
    assert abs(np.mean(vals) - 1.0) < 5 * np.std(vals) / np.sqrt(len(vals))


def test_rademacher_entries_exact():
    # with +/-1 entries, M * A_ij is an exact integer and diag(A) == 1
    p = ensembles.sample_covariance(12, 0.25, seed=3, entry_dist="rademacher")
    m = round(12 / 0.25)
    scaled = p.matrix * m
    assert np.allclose(scaled, np.round(scaled), atol=0.0)
    assert np.array_equal(np.diagonal(p.matrix), np.ones(12))


def test_covariance_edge_band():
    # lambda_minus = (1 - sqrt(0.2))^2 ~ 0.3056 at n=800, d=0.2
    for seed in (1, 2):
        p = ensembles.sample_covariance(800, 0.2, seed)
        lam = p.eigenvalues()
        assert 0.2 <= lam[0] <= 0.4
        assert 1.8 <= lam[-1] <= 2.4  # lambda_plus ~ 2.094


def test_covariance_rejects_bad_aspect():
    with pytest.raises(ValueError):
        ensembles.sample_covariance(10, 1.5, seed=0)
    with pytest.raises(ValueError):
        EnsembleSpec(kind=EnsembleKind.COVARIANCE_GAUSSIAN, n=10, seed=0, aspect_d=1.0)


def test_ones_vector():
    p = ensembles.sample_covariance(16, 0.5, seed=0, b_kind="ones")
    assert np.allclose(p.vector.hi, p.vector.hi[0])


def test_goe_semicircle_ks():
    from lanczos_lab.measures import SemicircleMeasure, ks_distance
    from lanczos_lab.stability import problem_vesd

    p = ensembles.sample_goe(2000, seed=11)
    mu = problem_vesd(p)
    assert ks_distance(mu, SemicircleMeasure(-1, 1)) <= 0.05


def test_serialization_roundtrip(tmp_path):
    p = ensembles.sample_covariance(20, 0.4, seed=5, entry_dist="rademacher")
    path = str(tmp_path / "inst.npz")
    ensembles.save_instance(p, path)
    q = ensembles.load_instance(path)
    assert np.array_equal(p.matrix, q.matrix)
    assert np.array_equal(p.vector.hi, q.vector.hi)
    assert np.array_equal(p.vector.lo, q.vector.lo)
    assert q.spec == p.spec


def test_wigner_generic():
    p = ensembles.generate(
        EnsembleSpec(kind=EnsembleKind.WIGNER_GENERIC, n=64, seed=1)
    )
    assert np.array_equal(p.matrix, p.matrix.T)
