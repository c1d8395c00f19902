import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from tensorcs.linalg import spectral_norm
from tensorcs.tensor import (flat_offset, fold, frobenius_norm, from_flat, kronecker, max_abs, mode_n_product,
                             multi_mode_product, read_ten1, to_flat, unfold, write_ten1)

T222 = from_flat(np.arange(1, 9), (2, 2, 2))

shapes = st.lists(st.integers(1, 4), min_size=1, max_size=4).map(tuple)
tensors = shapes.flatmap(lambda s: arrays(np.float64, s, elements=st.floats(-1e3, 1e3)))


def unfold_oracle(T, n):
    """Entry-by-entry placement from the column index formula."""
    dims = T.shape
    others = [m for m in range(T.ndim) if m != n]
    M = np.zeros((dims[n], int(np.prod([dims[m] for m in others]))))
    for idx in itertools.product(*map(range, dims)):
        j, stride = 0, 1
        for m in others:
            j += idx[m] * stride
            stride *= dims[m]
        M[idx[n], j] = T[idx]
    return M


def test_flat_storage_first_index_fastest():
    assert T222[1, 0, 0] == 2 and T222[0, 1, 0] == 3 and T222[0, 0, 1] == 5
    assert np.array_equal(to_flat(T222), np.arange(1, 9))
    assert flat_offset((1, 1, 1), (2, 2, 2)) == 7


def test_unfold_examples():
    assert np.array_equal(unfold(T222, 0), [[1, 3, 5, 7], [2, 4, 6, 8]])
    assert np.array_equal(unfold(T222, 1), [[1, 2, 5, 6], [3, 4, 7, 8]])


def test_unfold_matrix_is_identity_op(rng):
    M = rng.standard_normal((3, 5))
    assert np.array_equal(unfold(M, 0), M)
    assert np.array_equal(unfold(M, 1), M.T)


@pytest.mark.parametrize("n", [-1, 3])
def test_unfold_mode_out_of_range(n):
    with pytest.raises(ValueError):
        unfold(T222, n)


def test_fold_examples():
    assert np.array_equal(to_flat(fold([[1, 3, 5, 7], [2, 4, 6, 8]], 0, (2, 2, 2))), np.arange(1, 9))
    s = fold([[5.0]], 0, (1, 1, 1))
    assert s.shape == (1, 1, 1) and s[0, 0, 0] == 5.0


def test_fold_shape_mismatch():
    with pytest.raises(ValueError):
        fold(np.zeros((2, 3)), 0, (2, 2, 2))


@given(tensors, st.data())
def test_unfold_matches_index_formula(T, data):
    n = data.draw(st.integers(0, T.ndim - 1))
    assert np.array_equal(unfold(T, n), unfold_oracle(T, n))


@given(tensors, st.data())
def test_fold_unfold_round_trip_bit_exact(T, data):
    n = data.draw(st.integers(0, T.ndim - 1))
    assert np.array_equal(fold(unfold(T, n), n, T.shape), T)


def test_mode_product_examples(rng):
    out = mode_n_product(T222, np.array([[1.0, 1.0]]), 0)
    assert out.shape == (1, 2, 2)
    assert np.array_equal(to_flat(out), [3, 7, 11, 15])
    T = rng.standard_normal((3, 4, 5))
    for n in range(3):
        assert np.array_equal(mode_n_product(T, np.eye(T.shape[n]), n), T)


def test_mode_product_matches_unfolded_oracle(rng):
    T = rng.standard_normal((3, 4, 5))
    for n in range(3):
        M = rng.standard_normal((2, T.shape[n]))
        dims = list(T.shape)
        dims[n] = 2
        assert np.allclose(mode_n_product(T, M, n), fold(M @ unfold(T, n), n, dims), rtol=0, atol=1e-13)


def test_mode_product_dimension_mismatch():
    with pytest.raises(ValueError):
        mode_n_product(T222, np.ones((2, 3)), 1)


def test_mode_products_commute_across_modes(rng):
    T = rng.standard_normal((3, 4, 5))
    A, B = rng.standard_normal((2, 3)), rng.standard_normal((6, 5))
    lhs = mode_n_product(mode_n_product(T, A, 0), B, 2)
    rhs = mode_n_product(mode_n_product(T, B, 2), A, 0)
    assert np.allclose(lhs, rhs, atol=1e-12)
    assert np.allclose(multi_mode_product(T, [A, None, B]), lhs, atol=1e-12)


def test_unfolded_multi_product_is_kronecker(rng):
    # (T x_1 A x_2 B x_3 C)_(1) = A T_(1) (C kron B)^T with lowest mode fastest
    T = rng.standard_normal((3, 4, 5))
    A, B, C = rng.standard_normal((2, 3)), rng.standard_normal((3, 4)), rng.standard_normal((2, 5))
    lhs = unfold(multi_mode_product(T, [A, B, C]), 0)
    assert np.allclose(lhs, A @ unfold(T, 0) @ kronecker(C, B).T, atol=1e-12)


def test_kronecker_examples(rng):
    assert np.array_equal(kronecker([[1, 2]], [[3], [4]]), [[3, 6], [4, 8]])
    A = rng.standard_normal((3, 2))
    assert np.array_equal(kronecker(A, np.eye(1)), A)
    for _ in range(5):
        A, B = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
        assert np.isclose(spectral_norm(kronecker(A, B)), spectral_norm(A) * spectral_norm(B), rtol=1e-12)


def test_norm_examples(rng):
    assert frobenius_norm(np.zeros((2, 3, 4))) == 0
    assert frobenius_norm(np.array([3.0, 4.0])) == 5
    assert max_abs(np.array([[1.0, -7.0], [2.0, 3.0]])) == 7
    T = rng.standard_normal((3, 4, 5))
    assert np.isclose(frobenius_norm(T), np.linalg.norm(unfold(T, 0), "fro"), rtol=1e-15)


def test_ten1_round_trip_and_layout(tmp_path, rng):
    p = tmp_path / "t.ten"
    write_ten1(p, T222)
    raw = p.read_bytes()
    assert raw[:4] == b"TEN1"
    assert int.from_bytes(raw[4:8], "little") == 3
    assert [int.from_bytes(raw[8 + 8 * k:16 + 8 * k], "little") for k in range(3)] == [2, 2, 2]
    assert np.array_equal(np.frombuffer(raw[32:], "<f8"), np.arange(1, 9))
    T = rng.standard_normal((3, 1, 4, 2))
    write_ten1(p, T)
    assert np.array_equal(read_ten1(p), T)


def test_ten1_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.ten"
    p.write_bytes(b"TEN2" + bytes(12))
    with pytest.raises(ValueError):
        read_ten1(p)
    write_ten1(p, T222)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_ten1(p)
