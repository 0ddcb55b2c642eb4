# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled integer kernels.  Must agree bit-for-bit with _kernels_py."""

from libc.stdint cimport int64_t, uint64_t
import numpy as np


cdef inline uint64_t _splitmix64(uint64_t x) nogil:
    x += 0x9E3779B97F4A7C15ULL
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL
    return x ^ (x >> 31)


def splitmix64(uint64_t x):
    return _splitmix64(x)


def peel_order(int64_t[:, ::1] rows, Py_ssize_t n_cols):
    """Triangular pivot order: rows whose pivot column has degree one.

    Returns (pivot_rows, pivot_cols); rows absent from pivot_rows form the core.
    """
    cdef Py_ssize_t n_rows = rows.shape[0], width = rows.shape[1]
    cdef Py_ssize_t i, k, head = 0, tail = 0, n_out = 0
    cdef int64_t c, r, c2
    count_a = np.zeros(n_cols, dtype=np.int64)
    xor_a = np.zeros(n_cols, dtype=np.int64)
    queue_a = np.empty(n_cols + n_rows * width, dtype=np.int64)
    alive_a = np.ones(n_rows, dtype=np.int8)
    out_r_a = np.empty(n_rows, dtype=np.int64)
    out_c_a = np.empty(n_rows, dtype=np.int64)
    cdef int64_t[::1] count = count_a, xr = xor_a, queue = queue_a
    cdef int64_t[::1] out_r = out_r_a, out_c = out_c_a
    cdef signed char[::1] alive = alive_a
    for i in range(n_rows):
        for k in range(width):
            c = rows[i, k]
            count[c] += 1
            xr[c] ^= i
    for c in range(n_cols):
        if count[c] == 1:
            queue[tail] = c
            tail += 1
    while head < tail:
        c = queue[head]
        head += 1
        if count[c] != 1:
            continue
        r = xr[c]
        if not alive[r]:
            continue
        alive[r] = 0
        out_r[n_out] = r
        out_c[n_out] = c
        n_out += 1
        for k in range(width):
            c2 = rows[r, k]
            count[c2] -= 1
            xr[c2] ^= r
            if count[c2] == 1:
                queue[tail] = c2
                tail += 1
    return out_r_a[:n_out].copy(), out_c_a[:n_out].copy()


def bucket_candidates(Py_ssize_t n_items, Py_ssize_t n_buckets, Py_ssize_t z, uint64_t seed):
    """For each item, min(z, n_buckets) distinct candidate buckets."""
    cdef Py_ssize_t zz = z if z < n_buckets else n_buckets
    out_a = np.empty((n_items, zz), dtype=np.int64)
    cdef int64_t[:, ::1] out = out_a
    cdef Py_ssize_t i, k, j, got
    cdef uint64_t state, ctr
    cdef int64_t b
    cdef bint dup
    for i in range(n_items):
        state = seed ^ (<uint64_t>i * 0xD1B54A32D192ED03ULL)
        ctr = 0
        got = 0
        while got < zz:
            b = <int64_t>(_splitmix64(state + ctr) % <uint64_t>n_buckets)
            ctr += 1
            dup = False
            for j in range(got):
                if out[i, j] == b:
                    dup = True
                    break
            if not dup:
                out[i, got] = b
                got += 1
    return out_a
