# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Semantics mirror ``_pykernels`` exactly."""
import numpy as np

from libc.stdint cimport int64_t


def preemphasis(const double[::1] x, double alpha):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t s
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    if n == 0:
        return out
    y[0] = x[0]
    for s in range(1, n):
        y[s] = x[s] - alpha * x[s - 1]
    return out


def preemphasis_adjoint(const double[::1] g, double alpha):
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t s
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] gx = out
    if n == 0:
        return out
    for s in range(n - 1):
        gx[s] = g[s] - alpha * g[s + 1]
    gx[n - 1] = g[n - 1]
    return out


def frame_window(const double[::1] y, Py_ssize_t n_frames, Py_ssize_t hop,
                 const double[::1] window):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t fl = window.shape[0]
    cdef Py_ssize_t i, m, start, stop
    out = np.zeros((n_frames, fl), dtype=np.float64)
    cdef double[:, ::1] f = out
    for i in range(n_frames):
        start = i * hop
        stop = fl
        if start + stop > n:
            stop = n - start
        for m in range(stop):
            f[i, m] = y[start + m] * window[m]
    return out


def overlap_add(const double[:, ::1] frames, Py_ssize_t hop, Py_ssize_t length,
                const double[::1] weight):
    cdef Py_ssize_t n_frames = frames.shape[0]
    cdef Py_ssize_t fl = frames.shape[1]
    cdef Py_ssize_t i, m, start, stop
    out = np.zeros(length, dtype=np.float64)
    cdef double[::1] acc = out
    for i in range(n_frames):
        start = i * hop
        if start >= length:
            break
        stop = fl
        if start + stop > length:
            stop = length - start
        for m in range(stop):
            acc[start + m] += frames[i, m] * weight[m]
    return out


def edit_distance(const int64_t[::1] ref, const int64_t[::1] hyp):
    cdef Py_ssize_t n = ref.shape[0]
    cdef Py_ssize_t m = hyp.shape[0]
    cdef Py_ssize_t i, j
    cdef int64_t best, cand
    prev_arr = np.arange(m + 1, dtype=np.int64)
    cur_arr = np.empty(m + 1, dtype=np.int64)
    cdef int64_t[::1] prev = prev_arr
    cdef int64_t[::1] cur = cur_arr
    cdef int64_t[::1] tmp
    for i in range(1, n + 1):
        cur[0] = i
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            cand = prev[j] + 1
            if cand < best:
                best = cand
            cand = cur[j - 1] + 1
            if cand < best:
                best = cand
            cur[j] = best
        tmp = prev
        prev = cur
        cur = tmp
    return int(prev[m])
