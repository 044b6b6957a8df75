# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same signatures and semantics as ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp
from libc.stdlib cimport malloc, free
from cython.parallel cimport parallel, prange

cdef double SQRT2 = sqrt(2.0)
cdef double INV_PI = 0.3183098861837907

cnp.import_array()


cdef inline void _apply_linear(const double complex* src, double complex* dst,
                               const double* amp, double complex kappa,
                               double complex ckappa, double shift, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        dst[i] = shift * src[i]
    for i in range(n - 1):
        dst[i] = dst[i] + kappa * amp[i] * src[i + 1]
        dst[i + 1] = dst[i + 1] + ckappa * amp[i] * src[i]


cdef inline void _require(cnp.ndarray arr, int typenum, str name) except *:
    if cnp.PyArray_TYPE(arr) != typenum or not cnp.PyArray_IS_C_CONTIGUOUS(arr):
        raise TypeError(f"{name} must be a C-contiguous array of the documented dtype")


def cost_moments(cnp.ndarray vt, cnp.ndarray amp, double complex kx, double dx,
                 double complex kp, double dp, cnp.ndarray coeffs):
    _require(vt, cnp.NPY_COMPLEX128, "vt")
    _require(amp, cnp.NPY_FLOAT64, "amp")
    _require(coeffs, cnp.NPY_FLOAT64, "coeffs")
    if cnp.PyArray_NDIM(vt) != 2:
        raise ValueError("vt must be two-dimensional")
    cdef Py_ssize_t ncol = cnp.PyArray_DIM(vt, 0)
    cdef Py_ssize_t n = cnp.PyArray_DIM(vt, 1)
    cdef Py_ssize_t deg = cnp.PyArray_SIZE(coeffs) - 1
    if cnp.PyArray_SIZE(amp) < n - 1:
        raise ValueError("amplitude table shorter than the state")
    cdef const double complex* vv = <const double complex*> cnp.PyArray_DATA(vt)
    cdef const double* am = <const double*> cnp.PyArray_DATA(amp)
    cdef const double* cc = <const double*> cnp.PyArray_DATA(coeffs)
    cdef double complex* buf = <double complex*> malloc(3 * n * sizeof(double complex))
    if buf == NULL:
        raise MemoryError()
    cdef double complex* acc = buf
    cdef double complex* pw = buf + n
    cdef double complex* tmp = buf + 2 * n
    cdef double complex* swap
    cdef const double complex* col
    cdef double complex ckx = kx.conjugate()
    cdef double complex ckp = kp.conjugate()
    cdef double mean = 0.0, second = 0.0
    cdef double complex z
    cdef Py_ssize_t j, i, k
    with nogil:
        for j in range(ncol):
            col = vv + j * n
            _apply_linear(col, acc, am, kp, ckp, dp, n)
            if cc[0] != 0.0:
                for i in range(n):
                    acc[i] = acc[i] + cc[0] * col[i]
            for i in range(n):
                pw[i] = col[i]
            for k in range(1, deg + 1):
                _apply_linear(pw, tmp, am, kx, ckx, dx, n)
                swap = pw
                pw = tmp
                tmp = swap
                if cc[k] != 0.0:
                    for i in range(n):
                        acc[i] = acc[i] + cc[k] * pw[i]
            for i in range(n):
                z = col[i].conjugate() * acc[i]
                mean += z.real
                second += acc[i].real * acc[i].real + acc[i].imag * acc[i].imag
    free(buf)
    return mean, second


cdef void _wigner_row(const double complex* r, Py_ssize_t n, const double* xs, double p,
                      Py_ssize_t nx, const double* sq, const double* isq,
                      double complex* basis, double* out) noexcept nogil:
    cdef double complex b, cb, prev, nxt
    cdef double acc
    cdef Py_ssize_t ix, row, col
    for ix in range(nx):
        b = SQRT2 * (xs[ix] + 1j * p)
        cb = b.conjugate()
        basis[0] = exp(-0.5 * (b.real * b.real + b.imag * b.imag)) * INV_PI
        acc = r[0].real * basis[0].real
        for col in range(1, n):
            basis[col] = b * basis[col - 1] * isq[col]
            acc += 2.0 * (r[col] * basis[col]).real
        for row in range(1, n):
            prev = basis[row]
            basis[row] = (cb * prev - sq[row] * basis[row - 1]) * isq[row]
            acc += r[row * n + row].real * basis[row].real
            for col in range(row + 1, n):
                nxt = (b * basis[col - 1] - sq[row] * prev) * isq[col]
                prev = basis[col]
                basis[col] = nxt
                acc += 2.0 * (r[row * n + col] * nxt).real
        out[ix] = acc


def wigner_grid(rho, xvec, pvec):
    cdef cnp.ndarray rr = np.ascontiguousarray(rho, dtype=np.complex128)
    cdef cnp.ndarray xa = np.ascontiguousarray(xvec, dtype=np.float64)
    cdef cnp.ndarray pa = np.ascontiguousarray(pvec, dtype=np.float64)
    cdef Py_ssize_t n = cnp.PyArray_DIM(rr, 0)
    cdef Py_ssize_t nx = cnp.PyArray_SIZE(xa), npp = cnp.PyArray_SIZE(pa)
    cdef cnp.ndarray sqa = np.sqrt(np.arange(n, dtype=np.float64))
    cdef cnp.ndarray isqa = np.zeros(n, dtype=np.float64)
    isqa[1:] = 1.0 / sqa[1:]
    # computed p-major so each thread writes a contiguous row, transposed on return
    cdef cnp.ndarray out = np.empty((npp, nx), dtype=np.float64)
    cdef const double complex* r = <const double complex*> cnp.PyArray_DATA(rr)
    cdef const double* xs = <const double*> cnp.PyArray_DATA(xa)
    cdef const double* ps = <const double*> cnp.PyArray_DATA(pa)
    cdef const double* sq = <const double*> cnp.PyArray_DATA(sqa)
    cdef const double* isq = <const double*> cnp.PyArray_DATA(isqa)
    cdef double* w = <double*> cnp.PyArray_DATA(out)
    cdef double complex* basis
    cdef Py_ssize_t ip
    with nogil, parallel():
        basis = <double complex*> malloc(n * sizeof(double complex))
        for ip in prange(npp, schedule="static"):
            _wigner_row(r, n, xs, ps[ip], nx, sq, isq, basis, w + ip * nx)
        free(basis)
    return out.T.copy()
