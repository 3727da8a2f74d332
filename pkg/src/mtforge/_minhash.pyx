# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled MinHash kernel.

Hash family: h_i(x) = (a_i * x + b_i) mod p over the 61-bit Mersenne prime
p = 2^61 - 1, with the multiply carried out in 128-bit registers. Must stay
bit-identical to mtforge._minhash_py.
"""

import numpy as np

from libc.stdint cimport uint64_t

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t mtf_mulmod61(uint64_t a, uint64_t x) {
        const uint64_t P = 2305843009213693951ULL;
        __uint128_t z = (__uint128_t)a * (__uint128_t)x;
        uint64_t s = (uint64_t)(z & P) + (uint64_t)(z >> 61);
        while (s >= P) s -= P;
        return s;
    }
    """
    uint64_t mtf_mulmod61(uint64_t a, uint64_t x) nogil

cdef uint64_t P = 2305843009213693951ULL

BACKEND = "cython"


def min_hash(shingles, a, b):
    """Column minima of the hash matrix h_i(x_j) for shingles x and rows (a, b).

    shingles, a, b: uint64 ndarrays; a and b have equal length k and must
    satisfy 1 <= a[i] < p, 0 <= b[i] < p. 64-bit shingle values are folded
    into [0, p) first. Returns a uint64 array of length k.
    """
    cdef const uint64_t[::1] xs = np.ascontiguousarray(shingles, dtype=np.uint64)
    cdef const uint64_t[::1] av = np.ascontiguousarray(a, dtype=np.uint64)
    cdef const uint64_t[::1] bv = np.ascontiguousarray(b, dtype=np.uint64)
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t k = av.shape[0]
    if n == 0:
        raise ValueError("empty shingle set")
    if bv.shape[0] != k:
        raise ValueError("a and b length mismatch")

    out_arr = np.empty(k, dtype=np.uint64)
    red_arr = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] out = out_arr
    cdef uint64_t[::1] red = red_arr
    cdef Py_ssize_t i, j
    cdef uint64_t x, h, best

    with nogil:
        for j in range(n):
            x = (xs[j] & P) + (xs[j] >> 61)
            if x >= P:
                x -= P
            red[j] = x
        for i in range(k):
            best = P
            for j in range(n):
                h = mtf_mulmod61(av[i], red[j]) + bv[i]
                if h >= P:
                    h -= P
                if h < best:
                    best = h
            out[i] = best
    return out_arr
