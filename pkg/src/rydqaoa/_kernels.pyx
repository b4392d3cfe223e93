# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the layered ansatz.

Mirrors :mod:`rydqaoa._pykernels`; both must agree to 1e-12.
"""

from libc.math cimport cos, sin
from libc.stdlib cimport malloc, free


cdef void _layers(double complex* psi, Py_ssize_t dim, Py_ssize_t m,
                  const double[:, ::1] angles, const double[:, ::1] diag, int n) noexcept nogil:
    cdef Py_ssize_t p = angles.shape[0]
    cdef Py_ssize_t k, x, j, q, stride, blk, i0, i1, r0, r1
    cdef double ph, c, s
    cdef double complex f, a, b, mis
    for k in range(p):
        for x in range(dim):
            ph = -(angles[k, 4] * diag[0, x] + angles[k, 3] * diag[1, x]
                   + angles[k, 2] * diag[2, x] + angles[k, 1] * diag[3, x])
            f = cos(ph) + 1j * sin(ph)
            r0 = x * m
            for j in range(m):
                psi[r0 + j] = psi[r0 + j] * f
        c = cos(angles[k, 0])
        s = sin(angles[k, 0])
        mis = -1j * s
        for q in range(n):
            stride = (<Py_ssize_t>1) << (n - 1 - q)
            blk = 0
            while blk < dim:
                for i0 in range(blk, blk + stride):
                    i1 = i0 + stride
                    r0 = i0 * m
                    r1 = i1 * m
                    for j in range(m):
                        a = psi[r0 + j]
                        b = psi[r1 + j]
                        psi[r0 + j] = c * a + mis * b
                        psi[r1 + j] = mis * a + c * b
                blk += 2 * stride


cdef _check(Py_ssize_t dim, const double[:, ::1] angles, const double[:, ::1] diag, int n):
    if dim != (<Py_ssize_t>1 << n):
        raise ValueError("psi has the wrong number of rows")
    if diag.shape[0] != 4 or diag.shape[1] != dim:
        raise ValueError("diag must have shape (4, 2**n)")
    if angles.shape[1] != 5:
        raise ValueError("angles must have shape (p, 5)")


def apply_layers(double complex[:, ::1] psi, const double[:, ::1] angles,
                 const double[:, ::1] diag, int n):
    """Apply layers in place to every column of ``psi`` (shape ``(2**n, m)``).

    ``angles[k]`` is ``(alpha, beta_even, beta_odd, gamma_even, gamma_odd)``;
    ``diag`` rows are the ZZ_ODD, ZZ_EVEN, Z_ODD, Z_EVEN diagonals.
    """
    _check(psi.shape[0], angles, diag, n)
    if psi.shape[0] == 0 or psi.shape[1] == 0:
        return
    with nogil:
        _layers(&psi[0, 0], psi.shape[0], psi.shape[1], angles, diag, n)


def apply_layers_overlap(const double complex[::1] psi0, const double complex[::1] target,
                         const double[:, ::1] angles, const double[:, ::1] diag, int n):
    """Return ``|<target|U psi0>|**2``."""
    cdef Py_ssize_t dim = psi0.shape[0]
    cdef Py_ssize_t x
    cdef double complex acc = 0
    cdef double complex* work
    _check(dim, angles, diag, n)
    if target.shape[0] != dim:
        raise ValueError("target has the wrong dimension")
    work = <double complex*>malloc(dim * sizeof(double complex))
    if work == NULL:
        raise MemoryError()
    try:
        with nogil:
            for x in range(dim):
                work[x] = psi0[x]
            _layers(work, dim, 1, angles, diag, n)
            for x in range(dim):
                acc = acc + target[x].conjugate() * work[x]
    finally:
        free(work)
    return acc.real * acc.real + acc.imag * acc.imag


def apply_layers_trace(const double complex[:, ::1] target, const double[:, ::1] angles,
                       const double[:, ::1] diag, int n):
    """Return ``|Tr(target^dag U)| / dim`` for the layered unitary ``U``."""
    cdef Py_ssize_t dim = target.shape[0]
    cdef Py_ssize_t x, y
    cdef double complex acc = 0
    cdef double complex* work
    _check(dim, angles, diag, n)
    if target.shape[1] != dim:
        raise ValueError("target must be square")
    work = <double complex*>malloc(dim * dim * sizeof(double complex))
    if work == NULL:
        raise MemoryError()
    try:
        with nogil:
            for x in range(dim * dim):
                work[x] = 0
            for x in range(dim):
                work[x * dim + x] = 1
            _layers(work, dim, dim, angles, diag, n)
            for x in range(dim):
                for y in range(dim):
                    acc = acc + target[x, y].conjugate() * work[x * dim + y]
    finally:
        free(work)
    return abs(acc) / dim
