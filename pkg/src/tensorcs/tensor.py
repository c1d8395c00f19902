"""Dense tensor algebra: unfolding, folding, mode-n products, norms, TEN1 I/O.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Element
``(i1, ..., iN)`` (0-based here) sits at flat offset ``sum_n i_n * prod_{m<n} I_m``,
i.e. the first index runs fastest (``order="F"``). All flattening and
reshaping in this package goes through that convention so that the mode-n
unfolding places tensor element ``(i1, ..., iN)`` at matrix entry ``(i_n, j)``
with ``j = sum_{k != n} i_k * J_k`` and ``J_k = prod_{m < k, m != n} I_m``.

Mode arguments are 0-based throughout the Python API.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "as_tensor",
    "flat_offset",
    "unfold",
    "fold",
    "mode_n_product",
    "multi_mode_product",
    "kronecker",
    "frobenius_norm",
    "max_abs",
    "from_flat",
    "to_flat",
    "write_ten1",
    "read_ten1",
]

TEN1_MAGIC = b"TEN1"


def as_tensor(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        raise ValueError("a tensor needs at least one mode")
    return arr


def _check_mode(T: np.ndarray, n: int) -> int:
    if not isinstance(n, (int, np.integer)):
        raise TypeError(f"mode index must be an integer, got {type(n).__name__}")
    if not 0 <= n < T.ndim:
        raise ValueError(f"mode {n} out of range for order-{T.ndim} tensor")
    return int(n)


def from_flat(data: Sequence[float], dims: Sequence[int]) -> np.ndarray:
    """Build a tensor from first-index-fastest flat data."""
    dims = tuple(int(d) for d in dims)
    flat = np.asarray(data, dtype=np.float64).ravel()
    if flat.size != int(np.prod(dims)):
        raise ValueError(f"{flat.size} values do not fill dims {dims}")
    return flat.reshape(dims, order="F")


def to_flat(T: np.ndarray) -> np.ndarray:
    """Flat first-index-fastest view of the data (copy if needed)."""
    return np.ravel(T, order="F")


def flat_offset(index: Sequence[int], dims: Sequence[int]) -> int:
    """Offset of a 0-based multi-index in first-index-fastest storage."""
    offset, stride = 0, 1
    for i, d in zip(index, dims):
        offset += int(i) * stride
        stride *= int(d)
    return offset


def unfold(T: np.ndarray, n: int) -> np.ndarray:
    """Mode-n matricization, shape ``(I_n, prod_{m != n} I_m)``.

    The remaining indices enumerate columns in increasing mode order with the
    lowest mode running fastest.
    """
    T = np.asarray(T, dtype=np.float64)
    n = _check_mode(T, n)
    return np.moveaxis(T, n, 0).reshape(T.shape[n], -1, order="F")


def fold(M: np.ndarray, n: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    M = np.asarray(M, dtype=np.float64)
    dims = tuple(int(d) for d in dims)
    if not 0 <= n < len(dims):
        raise ValueError(f"mode {n} out of range for order-{len(dims)} tensor")
    rest = dims[:n] + dims[n + 1:]
    expected = (dims[n], int(np.prod(rest)))
    if M.ndim != 2 or M.shape != expected:
        raise ValueError(f"matrix of shape {M.shape} cannot fold into {dims} along mode {n}; "
                         f"expected {expected}")
    return np.moveaxis(M.reshape((dims[n],) + rest, order="F"), 0, n)


def mode_n_product(T: np.ndarray, M: np.ndarray, n: int) -> np.ndarray:
    """``T x_n M``: multiply every mode-n fiber of ``T`` by ``M``."""
    T = np.asarray(T, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    n = _check_mode(T, n)
    if M.ndim != 2 or M.shape[1] != T.shape[n]:
        raise ValueError(f"matrix with shape {M.shape} cannot act on mode {n} of size {T.shape[n]}")
    # tensordot puts the new axis last; move it back into place.
    return np.moveaxis(np.tensordot(T, M, axes=(n, 1)), -1, n)


def multi_mode_product(T: np.ndarray, matrices: Sequence[np.ndarray | None],
                       skip: int | None = None) -> np.ndarray:
    """Apply ``T x_1 M_1 x_2 ... x_N M_N`` in mode order.

    ``None`` entries (and the ``skip`` mode) are left untouched.
    """
    out = np.asarray(T, dtype=np.float64)
    if len(matrices) != out.ndim:
        raise ValueError(f"need {out.ndim} matrices, got {len(matrices)}")
    for n, M in enumerate(matrices):
        if M is None or n == skip:
            continue
        out = mode_n_product(out, M, n)
    return out


def kronecker(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` equals ``A[i, j] * B``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    return np.kron(A, B)


def frobenius_norm(T: np.ndarray) -> float:
    return float(np.linalg.norm(np.ravel(T)))


def max_abs(T: np.ndarray) -> float:
    T = np.asarray(T)
    return float(np.max(np.abs(T))) if T.size else 0.0


def write_ten1(path: str | Path, T: np.ndarray) -> None:
    """Write ``T`` as TEN1: magic, u32 order, u64 dims, f64 payload (all LE)."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim == 0:
        raise ValueError("cannot serialize a 0-order array")
    header = TEN1_MAGIC + struct.pack("<I", T.ndim) + struct.pack(f"<{T.ndim}Q", *T.shape)
    payload = np.ravel(T, order="F").astype("<f8", copy=False).tobytes()
    Path(path).write_bytes(header + payload)


def read_ten1(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != TEN1_MAGIC:
        raise ValueError(f"{path}: not a TEN1 file (bad magic {raw[:4]!r})")
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated header")
    (order,) = struct.unpack_from("<I", raw, 4)
    if order == 0:
        raise ValueError(f"{path}: order must be positive")
    dims_end = 8 + 8 * order
    if len(raw) < dims_end:
        raise ValueError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{order}Q", raw, 8)
    count = int(np.prod(dims))
    if len(raw) != dims_end + 8 * count:
        raise ValueError(f"{path}: payload holds {(len(raw) - dims_end) / 8:g} values, "
                         f"dims {dims} need {count}")
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=dims_end)
    return data.astype(np.float64).reshape(dims, order="F")
