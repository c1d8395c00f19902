import numpy as np
import pytest

from tensorcs.tensor import frobenius_norm, mode_n_product
from tensorcs.tucker import TuckerModel, best_rank_matrix, hosvd, random_tucker, tucker_als, tucker_reconstruct


def rel(A, B):
    return frobenius_norm(A - B) / frobenius_norm(B)


def test_reconstruct_rank_one_outer_product(rng):
    u, v = rng.standard_normal(4), rng.standard_normal(3)
    m = TuckerModel(np.ones((1, 1)), [u[:, None], v[:, None]])
    assert np.allclose(tucker_reconstruct(m), np.outer(u, v))


def test_reconstruct_identity_core_and_factors():
    G = np.zeros((3, 3, 3))
    for i in range(3):
        G[i, i, i] = 1.0
    T = tucker_reconstruct(TuckerModel(G, [np.eye(3)] * 3, [True] * 3))
    assert np.array_equal(T, G)


def test_reconstruct_matches_chained_products(rng):
    m = random_tucker((5, 6, 7), (2, 3, 4), rng, orthonormal=False)
    T = m.core
    for n, A in enumerate(m.factors):
        T = mode_n_product(T, A, n)
    assert np.allclose(tucker_reconstruct(m), T, atol=1e-13)


def test_model_validation(rng):
    with pytest.raises(ValueError):
        TuckerModel(np.ones((2, 2)), [np.ones((3, 2))])
    with pytest.raises(ValueError):
        TuckerModel(np.ones((2, 2)), [np.ones((3, 2)), np.ones((3, 3))])
    with pytest.raises(ValueError):
        TuckerModel(np.ones((2, 2)), [np.ones((3, 2)), np.ones((3, 2))], [True, True])


def test_hosvd_exact_rank(rng):
    X = tucker_reconstruct(random_tucker((6, 7, 8), (2, 2, 2), rng))
    m = hosvd(X, (2, 2, 2))
    assert frobenius_norm(tucker_reconstruct(m) - X) <= 1e-10 * frobenius_norm(X)
    assert all(m.orthonormal)


def test_hosvd_and_als_lossless_at_full_rank(rng):
    X = rng.standard_normal((3, 4, 5))
    assert rel(tucker_reconstruct(hosvd(X, X.shape)), X) <= 1e-12
    assert rel(tucker_reconstruct(tucker_als(X, X.shape)), X) <= 1e-12


def test_hosvd_quasi_optimal_against_als(rng):
    X = tucker_reconstruct(random_tucker((10, 11, 12), (3, 3, 3), rng)) + 0.3 * rng.standard_normal((10, 11, 12))
    ranks = (3, 3, 3)
    e_h = frobenius_norm(tucker_reconstruct(hosvd(X, ranks)) - X)
    e_a = frobenius_norm(tucker_reconstruct(tucker_als(X, ranks)) - X)
    assert e_a <= e_h + 1e-12
    assert e_h <= np.sqrt(3) * e_a


def test_als_exact_input_stops_after_one_sweep(rng):
    X = tucker_reconstruct(random_tucker((6, 7, 8), (2, 3, 2), rng))
    m, hist = tucker_als(X, (2, 3, 2), return_history=True)
    assert len(hist) == 2
    assert rel(tucker_reconstruct(m), X) <= 1e-10


def test_als_history_monotone_best(rng):
    X = rng.standard_normal((8, 9, 10))
    m, hist = tucker_als(X, (2, 2, 2), max_iters=20, return_history=True)
    assert frobenius_norm(tucker_reconstruct(m) - X) <= hist[0] + 1e-12
    assert frobenius_norm(tucker_reconstruct(m) - X) <= min(hist) + 1e-12


def test_rank_validation(rng):
    with pytest.raises(ValueError):
        hosvd(rng.standard_normal((3, 4)), (4, 2))
    with pytest.raises(ValueError):
        hosvd(rng.standard_normal((3, 4)), (2,))


def test_best_rank_matrix(rng):
    u, v = rng.standard_normal(6), rng.standard_normal(4)
    M1 = np.outer(u, v)
    assert np.allclose(best_rank_matrix(M1, 1), M1, atol=1e-12)
    M = rng.standard_normal((5, 7))
    assert np.allclose(best_rank_matrix(M, 5), M, atol=1e-12)
    M = rng.standard_normal((10, 10))
    S = np.linalg.svd(M, compute_uv=False)
    assert np.isclose(np.linalg.norm(M - best_rank_matrix(M, 3), 2), S[3], rtol=1e-10)
    with pytest.raises(ValueError):
        best_rank_matrix(M, 0)


def test_random_tucker_orthonormal(rng):
    m = random_tucker((5, 6), (2, 3), rng)
    for A in m.factors:
        assert np.allclose(A.T @ A, np.eye(A.shape[1]), atol=1e-12)
