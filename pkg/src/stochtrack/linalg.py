"""Dense LU solves, norms and a finite-difference Jacobian oracle.

The elimination loop is the hot path of every predictor and corrector
step, so it has a numba kernel and a pure-numpy twin with the same
pivoting rule. ``STOCHTRACK_NUMBA=0`` selects the numpy twin.
"""

import numpy as np

from ._accel import USE_NUMBA, njit
from .errors import DimensionMismatch, NonFiniteValue, SingularMatrix

__all__ = [
    "PIVOT_RTOL",
    "as_vector",
    "as_matrix",
    "lu_factor",
    "lu_solve_factored",
    "lu_solve",
    "norm2",
    "norm_inf",
    "finite_diff_jacobian",
]

PIVOT_RTOL = 1e-14


def as_vector(x, dtype=None, name="vector"):
    """Coerce ``x`` to a finite 1-D array."""
    v = np.asarray(x, dtype=dtype)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue(f"{name} contains NaN or Inf")
    return v


def as_matrix(a, dtype=None, name="matrix"):
    """Coerce ``a`` to a finite 2-D array."""
    m = np.asarray(a, dtype=dtype)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteValue(f"{name} contains NaN or Inf")
    return m


def _pivot_threshold(a):
    if a.size == 0:
        return 0.0
    return PIVOT_RTOL * float(np.max(np.sum(np.abs(a), axis=1)))


# -- kernels ---------------------------------------------------------------


@njit
def _lu_kernel_numba(lu, piv, thresh):
    # In-place Doolittle elimination with partial pivoting.
    # Returns -1 on success or the column whose pivot was too small.
    n = lu.shape[0]
    for k in range(n):
        p = k
        best = abs(lu[k, k])
        for i in range(k + 1, n):
            v = abs(lu[i, k])
            if v > best:
                best = v
                p = i
        if best <= thresh:
            return k
        piv[k] = p
        if p != k:
            for j in range(n):
                tmp = lu[k, j]
                lu[k, j] = lu[p, j]
                lu[p, j] = tmp
        inv = 1.0 / lu[k, k]
        for i in range(k + 1, n):
            lu[i, k] *= inv
            f = lu[i, k]
            if f != 0:
                for j in range(k + 1, n):
                    lu[i, j] -= f * lu[k, j]
    return -1


@njit
def _lu_subst_numba(lu, piv, b):
    n = lu.shape[0]
    x = b.copy()
    for k in range(n):
        p = piv[k]
        if p != k:
            tmp = x[k]
            x[k] = x[p]
            x[p] = tmp
    for i in range(n):
        s = x[i]
        for j in range(i):
            s -= lu[i, j] * x[j]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for j in range(i + 1, n):
            s -= lu[i, j] * x[j]
        x[i] = s / lu[i, i]
    return x


def _lu_kernel_numpy(lu, piv, thresh):
    n = lu.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= thresh:
            return k
        piv[k] = p
        if p != k:
            lu[[k, p], :] = lu[[p, k], :]
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return -1


def _lu_subst_numpy(lu, piv, b):
    n = lu.shape[0]
    x = b.copy()
    for k in range(n):
        p = piv[k]
        if p != k:
            x[k], x[p] = x[p], x[k]
    for i in range(n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1 :] @ x[i + 1 :]) / lu[i, i]
    return x


KERNELS = {
    "numba": (_lu_kernel_numba, _lu_subst_numba),
    "numpy": (_lu_kernel_numpy, _lu_subst_numpy),
}


def _backend(backend):
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    try:
        return KERNELS[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}") from None


# -- public API ------------------------------------------------------------


def lu_factor(a, backend=None):
    """Factor a square matrix as ``P A = L U`` with partial pivoting.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Real or complex matrix.
    backend : {"numba", "numpy", None}
        Kernel to use. ``None`` follows the ``STOCHTRACK_NUMBA`` flag.

    Returns
    -------
    lu : ndarray
        Packed factors, unit lower triangle implied.
    piv : ndarray of int64
        Row interchanges, ``piv[k]`` swapped with ``k`` at step ``k``.

    Raises
    ------
    SingularMatrix
        If a pivot modulus is at most ``1e-14`` times the largest
        absolute row sum of ``a``.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {a.shape}")
    dtype = np.complex128 if np.iscomplexobj(a) else np.float64
    lu = np.array(a, dtype=dtype, order="C", copy=True)
    piv = np.arange(lu.shape[0], dtype=np.int64)
    kern, _ = _backend(backend)
    col = kern(lu, piv, _pivot_threshold(lu))
    if col >= 0:
        raise SingularMatrix(f"pivot below threshold in column {col}", column=int(col))
    return lu, piv


def lu_solve_factored(lu, piv, b, backend=None):
    """Solve with factors from :func:`lu_factor`."""
    b = as_vector(b, name="rhs")
    if b.shape[0] != lu.shape[0]:
        raise DimensionMismatch(f"rhs length {b.shape[0]} != {lu.shape[0]}")
    dtype = np.result_type(lu.dtype, b.dtype)
    _, subst = _backend(backend)
    return subst(lu.astype(dtype, copy=False), piv, b.astype(dtype))


def lu_solve(a, b, backend=None):
    """Solve ``a @ x = b`` by LU with partial pivoting.

    Examples
    --------
    >>> lu_solve([[2.0, 0.0], [0.0, 4.0]], [2.0, 4.0])
    array([1., 1.])
    """
    a = as_matrix(a)
    b = as_vector(b, name="rhs")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"matrix {a.shape} and rhs {b.shape} disagree")
    if np.iscomplexobj(b) and not np.iscomplexobj(a):
        a = a.astype(np.complex128)
    lu, piv = lu_factor(a, backend=backend)
    return lu_solve_factored(lu, piv, b, backend=backend)


def norm2(v):
    """Euclidean norm of the element moduli; 0 for an empty vector."""
    v = np.asarray(v)
    if v.size == 0:
        return 0.0
    return float(np.linalg.norm(v.ravel()))


def norm_inf(v):
    """Largest element modulus; 0 for an empty vector."""
    v = np.asarray(v)
    if v.size == 0:
        return 0.0
    return float(np.max(np.abs(v)))


def finite_diff_jacobian(f, x):
    """Central-difference Jacobian of ``f`` at ``x``.

    Column ``j`` uses the step ``h_j = sqrt(eps) * max(1, |x_j|)``.
    Complex inputs are differenced along the real axis, which is exact
    for holomorphic ``f``.
    """
    x = np.atleast_1d(np.asarray(x))
    dtype = np.complex128 if np.iscomplexobj(x) else np.float64
    x = x.astype(dtype)
    f0 = np.atleast_1d(np.asarray(f(x)))
    out_dtype = np.result_type(f0.dtype, dtype)
    jac = np.empty((f0.shape[0], x.shape[0]), dtype=out_dtype)
    sq = np.sqrt(np.finfo(np.float64).eps)
    for j in range(x.shape[0]):
        h = sq * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        # use the realized step to cancel representation error in x +- h
        hh = (xp[j] - xm[j]).real
        jac[:, j] = (np.atleast_1d(f(xp)) - np.atleast_1d(f(xm))) / hh
    return jac
