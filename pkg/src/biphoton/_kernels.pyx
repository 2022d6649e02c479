# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; ``_kernels_py`` holds the reference numpy versions."""
from cython.parallel cimport prange
from libc.math cimport cos, sin, floor
import numpy as np
cimport numpy as cnp

cnp.import_array()


def phase_sums(const double[::1] dk, const double[::1] z, const double[::1] wenv,
               int num_threads=0):
    """Return (sum_i wenv_i cos(dk z_i), sum_i wenv_i sin(dk z_i)) per entry of dk."""
    cdef Py_ssize_t n = dk.shape[0], q = z.shape[0], i, j
    cdef double k, re, im
    out_re = np.empty(n, dtype=np.float64)
    out_im = np.empty(n, dtype=np.float64)
    cdef double[::1] ore = out_re
    cdef double[::1] oim = out_im
    if num_threads <= 0:
        for i in prange(n, nogil=True, schedule="static"):
            k = dk[i]
            re = 0.0
            im = 0.0
            for j in range(q):
                re = re + wenv[j] * cos(k * z[j])
                im = im + wenv[j] * sin(k * z[j])
            ore[i] = re
            oim[i] = im
    else:
        for i in prange(n, nogil=True, schedule="static", num_threads=num_threads):
            k = dk[i]
            re = 0.0
            im = 0.0
            for j in range(q):
                re = re + wenv[j] * cos(k * z[j])
                im = im + wenv[j] * sin(k * z[j])
            ore[i] = re
            oim[i] = im
    return out_re, out_im


def bin_events(const double[::1] pos1, const double[::1] pos2, long long[:, ::1] counts):
    """Increment ``counts[floor(pos1), floor(pos2)]`` for in-range events.

    Returns the number of events that landed inside the histogram.
    """
    cdef Py_ssize_t n = pos1.shape[0], i
    cdef Py_ssize_t m1 = counts.shape[0], m2 = counts.shape[1]
    cdef double a, b
    cdef long long ia, ib, kept = 0
    for i in range(n):
        a = floor(pos1[i])
        b = floor(pos2[i])
        # written positively so NaN positions are dropped too
        if not (a >= 0 and b >= 0 and a < m1 and b < m2):
            continue
        ia = <long long>a
        ib = <long long>b
        counts[ia, ib] += 1
        kept += 1
    return kept
