import itertools
import math

import numpy as np
import pytest

from sksos.ensembles import RngStream, sample_haar_stiefel
from sksos.errors import DimBudgetExceeded, InconsistentConstraints, RankDeficient
from sksos.etf import harmonic_frame
from sksos.linalg import isovec
from sksos.pseudomoments import heuristic_X22
from sksos.tensors import (
    GaussianTensorModel, SymTensorSpace, all_tuples, base_tensor_law, build_deg2k_model,
    condition_gaussian, conditional_covariance, conditional_mean_matrix, frozen_pair_matrix,
    permutation_count_covariance, pseudomoment_from_model, repeated_index_projector,
    sample_symmetrized_gaussian,
)
from sksos.witness import witness_from_frame


def random_symmetric_tensor(rng, n, k):
    G = rng.standard_normal((n,) * k)
    return sum(np.transpose(G, p) for p in itertools.permutations(range(k))) / math.factorial(k)


@pytest.mark.parametrize("n,k", [(n, k) for n in range(1, 5) for k in range(1, 4)])
def test_coordinates_are_isometric(n, k):
    rng = np.random.default_rng(10 * n + k)
    space = SymTensorSpace(n, k)
    assert space.dim == math.comb(n + k - 1, k)
    for _ in range(3):
        A, B = random_symmetric_tensor(rng, n, k), random_symmetric_tensor(rng, n, k)
        ya, yb = space.from_full(A), space.from_full(B)
        assert ya @ yb == pytest.approx(np.sum(A * B), abs=1e-10)
        assert np.allclose(space.to_full(ya), A, atol=1e-12)


def test_symmetric_product_coords_match_full_tensor():
    rng = np.random.default_rng(0)
    U = rng.standard_normal((3, 4))
    space = SymTensorSpace(3, 3)
    t = np.array([[0, 2, 3]])
    T = np.einsum("a,b,c->abc", U[:, 0], U[:, 2], U[:, 3])
    T = sum(np.transpose(T, p) for p in itertools.permutations(range(3))) / 6
    assert np.allclose(space.symmetric_product_coords(U, t)[0], space.from_full(T), atol=1e-13)


def test_all_tuples():
    assert all_tuples(3, 0).shape == (1, 0)
    assert all_tuples(2, 2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_base_law_k1_is_isotropic():
    m = base_tensor_law(5, 1, 2.5)
    assert np.array_equal(m.covariance, 2.5 * np.eye(5))
    assert np.array_equal(m.mean, np.zeros(5))


def test_base_law_k2_goe_pattern():
    raw = permutation_count_covariance(3, 2, 1.0)
    space = SymTensorSpace(3, 2)
    d, o = space.index((0, 0)), space.index((0, 1))
    # diagonal entries carry twice the variance of off-diagonal ones
    assert raw[d, d] == pytest.approx(2 * raw[o, o])
    assert raw[d, o] == 0.0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_base_law_is_isotropic_in_isometric_coordinates(k):
    m = base_tensor_law(3, k, 1.7)
    assert np.allclose(m.covariance, 1.7 * np.eye(m.space.dim), atol=1e-14)


def test_base_law_monte_carlo_k3():
    n, k, s2, reps = 2, 3, 1.3, 100_000
    X = sample_symmetrized_gaussian(n, k, s2, reps, np.random.default_rng(1))
    C = permutation_count_covariance(n, k, s2)
    for a in range(C.shape[0]):
        for b in range(C.shape[0]):
            prod = X[:, a] * X[:, b]
            se = prod.std(ddof=1) / math.sqrt(reps)
            assert abs(prod.mean() - C[a, b]) <= 4 * se + 1e-12, (a, b)


def iso_model(d, s2=1.0):
    space = SymTensorSpace(d, 1)
    return GaussianTensorModel(space, np.zeros(d), s2 * np.eye(d), {1: s2})


def test_condition_single_coordinate():
    m = condition_gaussian(iso_model(4), np.eye(4)[:1], [1.0])
    assert np.allclose(m.mean, [1, 0, 0, 0])
    assert np.allclose(m.covariance[0], 0) and np.allclose(m.covariance[:, 0], 0)
    assert np.allclose(m.covariance[1:, 1:], np.eye(3))


def test_sequential_equals_joint_conditioning():
    rng = np.random.default_rng(2)
    L = rng.standard_normal((6, 6))
    base = GaussianTensorModel(SymTensorSpace(6, 1), rng.standard_normal(6), L @ L.T, {1: 1.0})
    C1, C2 = rng.standard_normal((2, 6)), rng.standard_normal((1, 6))
    b1, b2 = rng.standard_normal(2), rng.standard_normal(1)
    seq = condition_gaussian(condition_gaussian(base, C1, b1), C2, b2)
    joint = condition_gaussian(base, np.vstack([C1, C2]), np.concatenate([b1, b2]))
    assert np.max(np.abs(seq.mean - joint.mean)) < 1e-9
    assert np.max(np.abs(seq.covariance - joint.covariance)) < 1e-9
    C = np.vstack([C1, C2])
    assert np.max(np.abs(C @ joint.mean - np.concatenate([b1, b2]))) < 1e-9
    assert np.max(np.abs(C @ joint.covariance)) < 1e-8
    assert np.linalg.eigvalsh(joint.covariance)[0] >= -1e-9


def test_inconsistent_constraints():
    C = np.vstack([np.eye(3)[0], np.eye(3)[0]])
    with pytest.raises(InconsistentConstraints):
        condition_gaussian(iso_model(3), C, [1.0, 2.0])


def exact_k2_algebra(V, sigma_sq):
    """Closed-form conditional mean and covariance of ``A_ij = v_i^T A v_j``."""
    r, N = V.shape
    P = V.T @ V
    B = np.column_stack([isovec(np.outer(V[:, i], V[:, i])) for i in range(N)])
    coef = np.linalg.solve(P**2, np.ones(N))
    mean = (P * coef) @ P
    Pt = B @ np.linalg.solve(B.T @ B, B.T)
    U = np.column_stack([isovec(np.outer(V[:, i], V[:, j]) + np.outer(V[:, j], V[:, i]))
                         for i in range(N) for j in range(N)])
    cov = (sigma_sq / 4) * U.T @ (np.eye(Pt.shape[0]) - Pt) @ U
    return mean, cov


def test_k2_engine_matches_exact_algebra():
    V = sample_haar_stiefel(12, 6, RngStream(3))
    m = build_deg2k_model(V, 2)
    mean, cov = exact_k2_algebra(V, m.sigma_sq[2])
    assert np.max(np.abs(conditional_mean_matrix(m, 12) - mean)) <= 1e-8
    assert np.max(np.abs(conditional_covariance(m) - cov)) <= 1e-8
    assert m.info["diag_mean"] == pytest.approx(1.0, abs=1e-10)


def test_k2_frozen_pairs_live_in_row_space():
    V = sample_haar_stiefel(10, 5, RngStream(4))
    Z = pseudomoment_from_model(build_deg2k_model(V, 2), 2)
    Q = np.eye(10) - V.T @ V
    for i, j in [(0, 1), (2, 2), (3, 7)]:
        assert np.linalg.norm(Q @ frozen_pair_matrix(Z, 10, i, j)) <= 1e-8


def test_k2_repeated_diagonal_is_deterministic():
    V = sample_haar_stiefel(8, 4, RngStream(5))
    T = pseudomoment_from_model(build_deg2k_model(V, 2), 2).reshape(8, 8, 8, 8)
    for i in range(8):
        assert T[i, i, i, i] == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(T[i, i], T[0, 0], atol=1e-10)


def test_k2_untf_with_default_scale():
    F = harmonic_frame(6, 14).vectors
    delta = 6 / 14
    # the base law at scale 2 s^2 is the GOE law of variance scale s^2
    m = build_deg2k_model(F, 2, sigma_list=[None, 2 / delta**2])
    T = pseudomoment_from_model(m, 2).reshape((14,) * 4)
    assert max(abs(T[i, i, i, i] - 1) for i in range(14)) <= 1e-8


def test_k1_model_lives_in_row_space():
    V = sample_haar_stiefel(9, 4, RngStream(6))
    m = build_deg2k_model(V, 1)
    assert np.array_equal(m.mean, np.zeros_like(m.mean))
    cov = pseudomoment_from_model(m, 1)
    Q = np.eye(9) - V.T @ V
    assert np.max(np.abs(Q @ cov @ Q)) <= 1e-10
    assert m.sigma_sq[1] == pytest.approx(9 / 4)


@pytest.mark.parametrize("k,coupling", [(2, "joint"), (3, "joint"), (3, "mean")])
def test_ambient_mode_agrees(k, coupling):
    V = sample_haar_stiefel(8, 6, RngStream(7))
    Z = pseudomoment_from_model(build_deg2k_model(V, k, coupling=coupling), k)
    Za = pseudomoment_from_model(build_deg2k_model(V, k, coupling=coupling, ambient=True), k)
    assert np.max(np.abs(Z - Za)) <= 1e-9


@pytest.mark.parametrize("k,coupling", [(2, "joint"), (3, "joint"), (3, "mean")])
def test_pseudomoments_psd_and_tuple_symmetric(k, coupling):
    N = 8
    V = sample_haar_stiefel(N, 6, RngStream(8))
    m = build_deg2k_model(V, k, coupling=coupling)
    Z = pseudomoment_from_model(m, k)
    assert np.array_equal(Z, Z.T)
    T = Z.reshape((N,) * (2 * k))
    for p in itertools.permutations(range(k)):
        assert np.array_equal(T, T.transpose(p + tuple(range(k, 2 * k))))
    assert np.linalg.eigvalsh(Z)[0] >= -1e-9
    assert np.linalg.eigvalsh(m.covariance)[0] >= -1e-9
    assert np.max(np.abs(m.constraint_rows @ m.covariance)) <= 1e-8


def test_k3_consistency_with_order_one():
    N = 8
    V = sample_haar_stiefel(N, 6, RngStream(9))
    m = build_deg2k_model(V, 3)
    T3 = pseudomoment_from_model(m, 3).reshape((N,) * 6)
    Z1 = pseudomoment_from_model(m, 1)
    # contracting a repeated pair in each tuple reproduces the order-one block
    for i, k in [(0, 1), (2, 5)]:
        for j, l in [(3, 3), (4, 6)]:
            assert T3[i, j, j, k, l, l] == pytest.approx(Z1[i, k], abs=1e-9)


def test_k3_needs_freedom():
    V = sample_haar_stiefel(6, 4, RngStream(10))
    with pytest.raises(RankDeficient):
        build_deg2k_model(V, 3)


def test_dim_budget():
    V = np.eye(30)
    with pytest.raises(DimBudgetExceeded):
        build_deg2k_model(V, 3)
    with pytest.raises(DimBudgetExceeded):
        repeated_index_projector(V, 3)


def test_bad_arguments():
    V = np.eye(3)
    with pytest.raises(ValueError):
        build_deg2k_model(V, 4)
    with pytest.raises(ValueError):
        build_deg2k_model(V, 2, coupling="other")


def test_repeated_index_ranks():
    V = sample_haar_stiefel(20, 10, RngStream(11))
    assert repeated_index_projector(V, 2).rank == 20
    assert repeated_index_projector(np.array([[1.0]]), 2).rank == 1
    V = sample_haar_stiefel(10, 6, RngStream(12))
    p = repeated_index_projector(V, 3)
    assert p.rank < 10 * 6
    assert np.allclose(p.matrix @ p.matrix, p.matrix, atol=1e-10)


def heuristic_gap(V, Z):
    N = V.shape[1]
    X = heuristic_X22(witness_from_frame(V).M)
    iu = np.triu_indices(N, 1)
    flat = iu[0] * N + iu[1]
    return float(np.max(np.abs(Z[np.ix_(flat, flat)] - X)))


def test_k2_gap_to_closed_form(expectations):
    N, r = 40, 20
    cal = expectations["k2_gap_to_heuristic_haar_N40_r20"]
    haar = [heuristic_gap(V, pseudomoment_from_model(build_deg2k_model(V, 2), 2))
            for V in (sample_haar_stiefel(N, r, RngStream(s)) for s in range(3))]
    F = harmonic_frame(r, N, first=3).vectors
    untf = heuristic_gap(F, pseudomoment_from_model(build_deg2k_model(F, 2), 2))
    assert max(haar) <= cal["max"]
    assert untf < min(haar)


@pytest.mark.parametrize("r", range(3, 8))
def test_k2_engine_reproduces_etf_closed_form(r):
    from sksos.etf import etf_deg4_extension, simplex_etf
    F = simplex_etf(r)
    N = F.N
    V = F.vectors * math.sqrt(r / N)   # orthonormal rows
    Z = pseudomoment_from_model(build_deg2k_model(V, 2), 2)
    iu = np.triu_indices(N, 1)
    flat = iu[0] * N + iu[1]
    assert np.max(np.abs(Z[np.ix_(flat, flat)] - etf_deg4_extension(F).Z22)) <= 1e-12
