# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled matrix-free ladder Hamiltonian kernel.

One fused sweep computes ``out = scale*(H x - shift*x) + beta*out`` and
optionally ``acc += coef*out``. Rows are gathered, so every output entry is
written once and the result does not depend on sweep order.
"""
from libc.stdint cimport int64_t, int32_t, uint64_t

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def h_step(const int64_t[::1] configs,
           const double[::1] diag,
           const int64_t[::1] masks,
           const double[::1] amps,
           const int32_t[::1] lo_rank,
           const int32_t[:, ::1] hi_rank,
           int half,
           const double complex[::1] x,
           double complex[::1] out,
           double scale=1.0,
           double shift=0.0,
           double beta=0.0,
           double complex[::1] acc=None,
           double complex coef=0.0):
    cdef Py_ssize_t dim = configs.shape[0]
    cdef Py_ssize_t nb = masks.shape[0]
    cdef Py_ssize_t k, b
    cdef int64_t c, m, f, lo
    cdef int64_t lomask = (<int64_t>1 << half) - 1
    cdef int32_t j
    cdef double sr, si, d, a, br, bi
    cdef double complex xv
    cdef bint use_acc = acc is not None
    if x.shape[0] != dim or out.shape[0] != dim:
        raise ValueError("vector length does not match the basis")
    if use_acc and acc.shape[0] != dim:
        raise ValueError("accumulator length does not match the basis")
    with nogil:
        for k in range(dim):
            c = configs[k]
            d = diag[k] - shift
            xv = x[k]
            sr = d * xv.real
            si = d * xv.imag
            for b in range(nb):
                m = c & masks[b]
                if m != 0 and m != masks[b]:
                    f = c ^ masks[b]
                    lo = f & lomask
                    j = lo_rank[lo] + hi_rank[__builtin_popcountll(<unsigned long long>lo), f >> half]
                    a = amps[b]
                    xv = x[j]
                    sr = sr + a * xv.real
                    si = si + a * xv.imag
            br = scale * sr
            bi = scale * si
            if beta != 0.0:
                xv = out[k]
                br = br + beta * xv.real
                bi = bi + beta * xv.imag
            out[k].real = br
            out[k].imag = bi
            if use_acc:
                acc[k].real = acc[k].real + coef.real * br - coef.imag * bi
                acc[k].imag = acc[k].imag + coef.real * bi + coef.imag * br
