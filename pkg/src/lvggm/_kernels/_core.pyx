"""Compiled hot kernels: entrywise shrinkage and the two symmetric eigenvalue maps.

Same contracts as ``numpy_backend``; the spectral kernels call LAPACK dsyevd
directly and fuse the eigenvalue map with the basis reconstruction, avoiding
the temporaries of the NumPy reference path.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm
from scipy.linalg.cython_lapack cimport dsyevd

cnp.import_array()


def soft_threshold(cnp.ndarray[cnp.float64_t, ndim=2] M, double tau):
    """Entrywise shrinkage sign(m) * max(|m| - tau, 0)."""
    cdef Py_ssize_t n = M.shape[0], m = M.shape[1], i, j
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m))
    cdef double v
    for i in range(n):
        for j in range(m):
            v = M[i, j]
            if v > tau:
                out[i, j] = v - tau
            elif v < -tau:
                out[i, j] = v + tau
            else:
                out[i, j] = 0.0
    return out


cdef int _eigh_inplace(double[::1, :] A, double[::1] w) except -1:
    # dsyevd overwrites A (Fortran order) with the eigenvectors, w ascending.
    cdef int n = <int> A.shape[0]
    cdef int info = 0, lwork = -1, liwork = -1
    cdef double wkopt = 0.0
    cdef int iwkopt = 0
    dsyevd("V", "L", &n, &A[0, 0], &n, &w[0], &wkopt, &lwork, &iwkopt,
           &liwork, &info)
    lwork = <int> wkopt
    liwork = iwkopt
    work_arr = np.empty(lwork)
    iwork_arr = np.empty(liwork, dtype=np.intc)
    cdef double[::1] work = work_arr
    cdef int[::1] iwork = iwork_arr
    dsyevd("V", "L", &n, &A[0, 0], &n, &w[0], &work[0], &lwork, &iwork[0],
           &liwork, &info)
    if info != 0:
        raise np.linalg.LinAlgError("dsyevd failed with info=%d" % info)
    return 0


cdef object _reconstruct(double[::1, :] V, double[::1] d):
    # Returns the symmetrized V @ diag(d) @ V.T as a C-contiguous array.
    cdef int n = <int> V.shape[0]
    cdef Py_ssize_t i, k
    scaled_arr = np.empty((n, n), order="F")
    prod_arr = np.empty((n, n), order="F")
    cdef double[::1, :] scaled = scaled_arr
    cdef double[::1, :] prod = prod_arr
    cdef double one = 1.0, zero = 0.0
    for k in range(n):
        for i in range(n):
            scaled[i, k] = V[i, k] * d[k]
    dgemm("N", "T", &n, &n, &n, &one, &scaled[0, 0], &n, &V[0, 0], &n,
          &zero, &prod[0, 0], &n)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, n))
    for i in range(n):
        for k in range(n):
            out[i, k] = 0.5 * (prod[i, k] + prod[k, i])
    return out


def psd_trace_prox(M, double tau):
    """Eigenvalue map d -> max(d - tau, 0) of a symmetric matrix."""
    cdef Py_ssize_t n = M.shape[0], k
    # always copy: dsyevd overwrites its input with the eigenvectors
    A_arr = np.array(M, dtype=np.float64, order="F", copy=True)
    w_arr = np.empty(n)
    cdef double[::1, :] A = A_arr
    cdef double[::1] w = w_arr
    _eigh_inplace(A, w)
    cdef double v
    for k in range(n):
        v = w[k] - tau
        w[k] = v if v > 0.0 else 0.0
    return _reconstruct(A, w)


def logdet_prox_core(A_in, double rho):
    """Eigenvalue map d -> (d + sqrt(d^2 + 4*rho)) / (2*rho) of symmetric A."""
    cdef Py_ssize_t n = A_in.shape[0], k
    A_arr = np.array(A_in, dtype=np.float64, order="F", copy=True)
    w_arr = np.empty(n)
    cdef double[::1, :] A = A_arr
    cdef double[::1] w = w_arr
    _eigh_inplace(A, w)
    cdef double two_rho = 2.0 * rho, v
    for k in range(n):
        v = w[k]
        w[k] = (v + sqrt(v * v + 4.0 * rho)) / two_rho
    return _reconstruct(A, w)
