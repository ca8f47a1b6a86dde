# cython: language_level=3
"""Compiled Monte Carlo accumulation kernel.

Fuses the affine map ``y = center + L z``, the signed sum of exponentials,
the event test and the log importance weight so no per-sample temporaries of
shape (N, n) are allocated.
"""

from libc.math cimport exp, INFINITY
from libc.stdlib cimport free, malloc


cdef inline void _kahan_add(double* total, double* comp, double value) noexcept nogil:
    cdef double y = value - comp[0]
    cdef double t = total[0] + y
    comp[0] = (t - total[0]) - y
    total[0] = t


def accumulate_chunk(const double[:, ::1] z, const double[:, ::1] chol,
                     const double[::1] center, const double[::1] signs,
                     const double[::1] alpha, double log_shift,
                     double level, bint upper):
    """Return ``(hits, min_logw, max_logw, s1, s2)`` for one chunk of normals.

    ``s1 = sum exp(logw - max_logw)`` and ``s2 = sum exp(2 (logw - max_logw))``
    over the samples in the event; with no hits the extremes are ``+inf`` and
    ``-inf``.
    """
    cdef Py_ssize_t n_samples = z.shape[0]
    cdef Py_ssize_t n = z.shape[1]
    cdef Py_ssize_t k, i, j, hits = 0
    cdef double acc, y, total, lw
    cdef double max_lw = -INFINITY
    cdef double min_lw = INFINITY
    cdef double s1 = 0.0, c1 = 0.0, s2 = 0.0, c2 = 0.0, d
    cdef double* buf = <double*> malloc(max(n_samples, 1) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for k in range(n_samples):
                total = 0.0
                for i in range(n):
                    acc = center[i]
                    for j in range(i + 1):
                        acc = acc + chol[i, j] * z[k, j]
                    total = total + signs[i] * exp(acc)
                if (upper and total >= level) or ((not upper) and total <= level):
                    lw = log_shift
                    for j in range(n):
                        lw = lw - alpha[j] * z[k, j]
                    buf[hits] = lw
                    hits += 1
                    if lw > max_lw:
                        max_lw = lw
                    if lw < min_lw:
                        min_lw = lw
            for k in range(hits):
                d = exp(buf[k] - max_lw)
                _kahan_add(&s1, &c1, d)
                _kahan_add(&s2, &c2, d * d)
    finally:
        free(buf)
    return hits, min_lw, max_lw, s1, s2
