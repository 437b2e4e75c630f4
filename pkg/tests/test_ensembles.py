import numpy as np
import pytest

from sksos.ensembles import (
    RngStream, haar_moment_suite, haar_moment_targets, haar_orthogonal, sample_goe,
    sample_haar_stiefel, sample_iid_unit_vectors,
)


def test_streams_are_reproducible_and_distinct():
    a = sample_goe(5, RngStream(11, 3))
    b = sample_goe(5, RngStream(11, 3))
    c = sample_goe(5, RngStream(11, 4))
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_goe_entry_variances():
    N, reps = 8, 4000
    gen = np.random.default_rng(0)
    W = np.stack([sample_goe(N, gen) for _ in range(reps)])
    assert np.array_equal(W, np.transpose(W, (0, 2, 1)))
    diag = W[:, np.arange(N), np.arange(N)].ravel()
    off = W[:, 0, 1:].ravel()
    # sample variances of gaussians: relative SE sqrt(2/n)
    assert diag.var() == pytest.approx(2 / N, rel=5 * np.sqrt(2 / diag.size))
    assert off.var() == pytest.approx(1 / N, rel=5 * np.sqrt(2 / off.size))


def test_haar_orthogonal_is_orthogonal():
    Q = haar_orthogonal(7, RngStream(1), size=5)
    for q in Q:
        assert np.allclose(q @ q.T, np.eye(7), atol=1e-12)


def test_stiefel_rows_orthonormal():
    V = sample_haar_stiefel(20, 6, RngStream(2))
    assert V.shape == (6, 20)
    assert np.allclose(V @ V.T, np.eye(6), atol=1e-12)


def test_iid_unit_vectors():
    U = sample_iid_unit_vectors(4, 30, RngStream(3))
    assert U.shape == (4, 30)
    assert np.allclose(np.linalg.norm(U, axis=0), 1.0)


def test_haar_targets_match_circle_integrals_for_n2():
    # O(2) = rotations and reflections by a uniform angle; average both cosets
    t = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    c, s = np.cos(t), np.sin(t)
    rot = (c, -s, s, c)
    ref = (c, s, s, -c)

    def avg(f):
        return 0.5 * (np.mean(f(*rot)) + np.mean(f(*ref)))

    oracle = {
        "Q11": avg(lambda a, b, cc, d: a),
        "Q11^2": avg(lambda a, b, cc, d: a**2),
        "Q11^4": avg(lambda a, b, cc, d: a**4),
        "Q11^2 Q12^2": avg(lambda a, b, cc, d: a**2 * b**2),
        "Q11^2 Q22^2": avg(lambda a, b, cc, d: a**2 * d**2),
        "Q11 Q12 Q21 Q22": avg(lambda a, b, cc, d: a * b * cc * d),
    }
    for name, value in haar_moment_targets(2).items():
        assert value == pytest.approx(oracle[name], abs=1e-12), name


def test_haar_targets_row_norm_identities():
    # sum_j Q1j^2 = 1 and sum_j Q1j^4 + sum_{j != k} Q1j^2 Q1k^2 = 1
    for N in (3, 6, 11):
        t = haar_moment_targets(N)
        assert N * t["Q11^2"] == pytest.approx(1.0)
        assert N * t["Q11^4"] + N * (N - 1) * t["Q11^2 Q12^2"] == pytest.approx(1.0)


def test_haar_moment_suite_small_run():
    rep = haar_moment_suite(4, 20_000, RngStream(5))
    assert rep.passed(4.0), rep.as_dict()
    assert len(rep.moments) == 6


def test_haar_moment_suite_rejects_few_samples():
    with pytest.raises(ValueError):
        haar_moment_suite(4, 100, RngStream(0))
