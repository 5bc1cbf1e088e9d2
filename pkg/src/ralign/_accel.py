"""Hot pairwise loops, with a numba path and a pure-numpy fallback.

Set ``RALIGN_NO_NUMBA=1`` to force the numpy path (numba is also skipped
when it cannot be imported). Both paths give the same results to round-off;
within one path every entry and every row reduction is summed in a fixed
order, so output does not depend on the thread count. Whole-matrix
reductions are done row by row, then the row partials are summed
sequentially.
"""
from __future__ import annotations

import os

import numpy as np

KIND_LINEAR = 0
KIND_RBF = 1

_BLOCK_ELEMS = 1 << 22


def _numba_requested() -> bool:
    return os.environ.get("RALIGN_NO_NUMBA", "").strip().lower() not in ("1", "true", "yes", "on")


try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # OpenMP is safe for concurrent callers and skips the TBB version probe
        try:
            from numba.np.ufunc import omppool  # noqa: F401

            numba.config.THREADING_LAYER = "omp"
        except ImportError:  # pragma: no cover
            pass
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()


# ---------------------------------------------------------------- numpy path


def _row_blocks(n: int, width: int):
    step = max(1, _BLOCK_ELEMS // max(1, width))
    for start in range(0, n, step):
        yield start, min(n, start + step)


def sqdist_numpy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.empty((x.shape[0], y.shape[0]))
    for a, b in _row_blocks(x.shape[0], y.shape[0] * x.shape[1]):
        diff = x[a:b, None, :] - y[None, :, :]
        out[a:b] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def linear_numpy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y.T


def _pair_block(x, y, kind, gamma):
    if kind == KIND_LINEAR:
        return x @ y.T
    diff = x[:, None, :] - y[None, :, :]
    return np.exp(-gamma * np.einsum("ijk,ijk->ij", diff, diff))


def distance_alignment_rows_numpy(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    n = x1.shape[0]
    rows = np.empty(n)
    for a, b in _row_blocks(n, n * (x1.shape[1] + x2.shape[1])):
        d1 = sqdist_numpy(x1[a:b], x1)
        d2 = sqdist_numpy(x2[a:b], x2)
        rows[a:b] = ((d1 - d2) ** 2).sum(axis=1)
    return rows


def kernel_product_rows_numpy(x1, x2, kind1, gamma1, kind2, gamma2) -> np.ndarray:
    n = x1.shape[0]
    rows = np.empty((n, 3))
    for a, b in _row_blocks(n, n * (x1.shape[1] + x2.shape[1])):
        k1 = _pair_block(x1[a:b], x1, kind1, gamma1)
        k2 = _pair_block(x2[a:b], x2, kind2, gamma2)
        rows[a:b, 0] = (k1 * k2).sum(axis=1)
        rows[a:b, 1] = (k1 * k1).sum(axis=1)
        rows[a:b, 2] = (k2 * k2).sum(axis=1)
    return rows


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def sqdist_numba(x, y):
        n, m, d = x.shape[0], y.shape[0], x.shape[1]
        out = np.empty((n, m))
        for i in prange(n):
            for j in range(m):
                acc = 0.0
                for k in range(d):
                    t = x[i, k] - y[j, k]
                    acc += t * t
                out[i, j] = acc
        return out

    @njit(parallel=True, cache=True)
    def linear_numba(x, y):
        n, m, d = x.shape[0], y.shape[0], x.shape[1]
        out = np.empty((n, m))
        for i in prange(n):
            for j in range(m):
                acc = 0.0
                for k in range(d):
                    acc += x[i, k] * y[j, k]
                out[i, j] = acc
        return out

    @njit(cache=True)
    def _pair_value(x, i, j, kind, gamma):
        acc = 0.0
        if kind == 0:
            for k in range(x.shape[1]):
                acc += x[i, k] * x[j, k]
            return acc
        for k in range(x.shape[1]):
            t = x[i, k] - x[j, k]
            acc += t * t
        return np.exp(-gamma * acc)

    @njit(parallel=True, cache=True)
    def distance_alignment_rows_numba(x1, x2):
        n = x1.shape[0]
        rows = np.empty(n)
        for i in prange(n):
            acc = 0.0
            for j in range(n):
                d1 = 0.0
                for k in range(x1.shape[1]):
                    t = x1[i, k] - x1[j, k]
                    d1 += t * t
                d2 = 0.0
                for k in range(x2.shape[1]):
                    t = x2[i, k] - x2[j, k]
                    d2 += t * t
                diff = d1 - d2
                acc += diff * diff
            rows[i] = acc
        return rows

    @njit(parallel=True, cache=True)
    def kernel_product_rows_numba(x1, x2, kind1, gamma1, kind2, gamma2):
        n = x1.shape[0]
        rows = np.empty((n, 3))
        for i in prange(n):
            s12 = 0.0
            s11 = 0.0
            s22 = 0.0
            for j in range(n):
                a = _pair_value(x1, i, j, kind1, gamma1)
                b = _pair_value(x2, i, j, kind2, gamma2)
                s12 += a * b
                s11 += a * a
                s22 += b * b
            rows[i, 0] = s12
            rows[i, 1] = s11
            rows[i, 2] = s22
        return rows

    def set_threads(k: int) -> None:
        numba.set_num_threads(max(1, min(int(k), numba.config.NUMBA_NUM_THREADS)))

else:  # pragma: no cover

    def set_threads(k: int) -> None:
        return None


# ---------------------------------------------------------------- dispatch


def _c(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def sqdist(x, y) -> np.ndarray:
    if USE_NUMBA:
        return sqdist_numba(_c(x), _c(y))
    return sqdist_numpy(_c(x), _c(y))


def linear(x, y) -> np.ndarray:
    if USE_NUMBA:
        return linear_numba(_c(x), _c(y))
    return linear_numpy(_c(x), _c(y))


def distance_alignment_sum(x1, x2) -> float:
    if USE_NUMBA:
        rows = distance_alignment_rows_numba(_c(x1), _c(x2))
    else:
        rows = distance_alignment_rows_numpy(_c(x1), _c(x2))
    return float(np.sum(rows))


def kernel_product_sums(x1, x2, kind1, gamma1, kind2, gamma2) -> tuple[float, float, float]:
    """(<K1,K2>_F, <K1,K1>_F, <K2,K2>_F) without materialising either Gram matrix."""
    args = (_c(x1), _c(x2), int(kind1), float(gamma1), int(kind2), float(gamma2))
    rows = kernel_product_rows_numba(*args) if USE_NUMBA else kernel_product_rows_numpy(*args)
    s = rows.sum(axis=0)
    return float(s[0]), float(s[1]), float(s[2])
