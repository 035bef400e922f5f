# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: the hot inner loops behind qkit.backend.

Mirrors qkit._kernels_py function for function. The float32 round trip is
reproduced bit for bit (same rint rounding, same float32 materialization of
decoded values); only summation order may differ at the 1e-15 level.
"""
import numpy as np

cimport numpy as cnp
cimport openmp
from cython.parallel import prange
from libc.math cimport rint

cnp.import_array()


def encode_uniform(const float[::1] x, double r_l, double r_u, double s,
                   double z, long qmin, long qmax):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    codes_arr = np.empty(n, dtype=np.int32)
    cdef int[::1] codes = codes_arr
    cdef double v, q
    with nogil:
        for i in range(n):
            v = x[i]
            if v < r_l:
                v = r_l
            elif v > r_u:
                v = r_u
            q = rint((v - z) / s)
            if q < <double> qmin:
                q = <double> qmin
            elif q > <double> qmax:
                q = <double> qmax
            codes[i] = <int> q
    return codes_arr


def decode_uniform(const int[::1] codes, double s, double z):
    cdef Py_ssize_t n = codes.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n, dtype=np.float32)
    cdef float[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = <float> (s * codes[i] + z)
    return out_arr


def mse_uniform(const float[::1] x, double r_l, double r_u, double s,
                double z, long qmin, long qmax):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double v, q, d, acc = 0.0
    cdef float dec
    with nogil:
        for i in range(n):
            v = x[i]
            if v < r_l:
                v = r_l
            elif v > r_u:
                v = r_u
            q = rint((v - z) / s)
            if q < <double> qmin:
                q = <double> qmin
            elif q > <double> qmax:
                q = <double> qmax
            dec = <float> (s * q + z)
            d = (<double> dec) - (<double> x[i])
            acc += d * d
    return acc / n


def encode_pwlq(const float[::1] x, const double[::1] edges,
                const double[::1] scales, long mag_max):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_bp = edges.shape[0] - 2
    cdef Py_ssize_t i, r
    cdef double m = edges[edges.shape[0] - 1]
    codes_arr = np.empty(n, dtype=np.int32)
    regions_arr = np.empty(n, dtype=np.uint8)
    cdef int[::1] codes = codes_arr
    cdef unsigned char[::1] regions = regions_arr
    cdef double a, mag
    with nogil:
        for i in range(n):
            a = x[i]
            if a < 0.0:
                a = -a
            if a > m:
                a = m
            r = 0
            while r < n_bp and a > edges[r + 1]:
                r += 1
            mag = rint((a - edges[r]) / scales[r])
            if mag < 0.0:
                mag = 0.0
            elif mag > <double> mag_max:
                mag = <double> mag_max
            regions[i] = <unsigned char> r
            if x[i] < 0.0:
                codes[i] = <int> (-mag - 1.0)
            else:
                codes[i] = <int> mag
    return codes_arr, regions_arr


def decode_pwlq(const int[::1] codes, const unsigned char[::1] regions,
                const double[::1] scales, const double[::1] offsets,
                double shift):
    cdef Py_ssize_t n = codes.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n, dtype=np.float32)
    cdef float[::1] out = out_arr
    cdef double mag, val
    cdef int c
    with nogil:
        for i in range(n):
            c = codes[i]
            if c < 0:
                mag = <double> (-c - 1)
                val = scales[regions[i]] * mag + offsets[regions[i]]
                out[i] = <float> (-val + shift)
            else:
                val = scales[regions[i]] * c + offsets[regions[i]]
                out[i] = <float> (val + shift)
    return out_arr


cdef double _mse_one(const float[::1] a, Py_ssize_t n, double m,
                     long mag_max, double p) noexcept nogil:
    cdef double s1 = p / mag_max
    cdef double s2 = (m - p) / mag_max
    cdef double acc = 0.0
    cdef double v, d
    cdef float dec
    cdef Py_ssize_t lo = 0, hi = n, mid, i
    while lo < hi:
        mid = (lo + hi) // 2
        if a[mid] <= p:
            lo = mid + 1
        else:
            hi = mid
    for i in range(lo):
        v = a[i]
        dec = <float> (s1 * rint(v / s1))
        d = (<double> dec) - v
        acc += d * d
    for i in range(lo, n):
        v = a[i]
        dec = <float> (p + s2 * rint((v - p) / s2))
        d = (<double> dec) - v
        acc += d * d
    return acc / n


def mse_curve_pwlq(const float[::1] a_sorted, double m, long mag_max,
                   const double[::1] ps, int num_threads=0):
    cdef Py_ssize_t n = a_sorted.shape[0]
    cdef Py_ssize_t nps = ps.shape[0]
    cdef Py_ssize_t j
    out_arr = np.empty(nps, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef int nt = num_threads if num_threads > 0 else openmp.omp_get_max_threads()
    for j in prange(nps, nogil=True, schedule="dynamic", num_threads=nt):
        out[j] = _mse_one(a_sorted, n, m, mag_max, ps[j])
    return out_arr


def accumulate_uniform(const int[::1] xq, const int[::1] wq):
    cdef Py_ssize_t n = xq.shape[0]
    cdef Py_ssize_t i
    cdef long long acc = 0, absacc = 0, prod
    with nogil:
        for i in range(n):
            prod = (<long long> xq[i]) * (<long long> wq[i])
            acc += prod
            absacc += prod if prod >= 0 else -prod
    return int(acc), int(absacc)


def accumulate_pwlq(const int[::1] xq, const int[::1] wc,
                    const unsigned char[::1] regions, int n_regions):
    cdef Py_ssize_t n = xq.shape[0]
    cdef Py_ssize_t i
    cdef long long A[4]
    cdef long long S[4]
    cdef long long absA[4]
    cdef long long absS[4]
    cdef long long counts[4]
    cdef long long prod, xv, sx
    cdef int r, c
    if n_regions < 1 or n_regions > 4:
        raise ValueError("n_regions must be in 1..4")
    for r in range(4):
        A[r] = 0
        S[r] = 0
        absA[r] = 0
        absS[r] = 0
        counts[r] = 0
    with nogil:
        for i in range(n):
            c = wc[i]
            r = regions[i]
            xv = <long long> xq[i]
            if c < 0:
                prod = xv * (<long long> (-c - 1)) * -1
                sx = -xv
            else:
                prod = xv * (<long long> c)
                sx = xv
            A[r] += prod
            absA[r] += prod if prod >= 0 else -prod
            S[r] += sx
            absS[r] += xv if xv >= 0 else -xv
            counts[r] += 1
    mk = lambda arr: np.array([arr[k] for k in range(n_regions)], dtype=np.int64)
    return mk(A), mk(S), mk(absA), mk(absS), mk(counts)
