"""NumPy MinHash kernel, used when the compiled extension is unavailable.

Exact 61-bit Mersenne-prime arithmetic in 64-bit lanes: operands are split
into 30/31-bit halves so no partial product overflows, and powers of two are
reduced with 2^61 = 1 (mod p). Bit-identical to mtforge._minhash.
"""

from __future__ import annotations

import numpy as np

P_INT = (1 << 61) - 1

_P = np.uint64(P_INT)
_MASK30 = np.uint64((1 << 30) - 1)
_MASK31 = np.uint64((1 << 31) - 1)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S61 = np.uint64(61)

BACKEND = "numpy"

# Cap on the (k, n) hash-matrix size per chunk, to bound temporaries.
_CHUNK_CELLS = 4_000_000


def _fold61(v: np.ndarray) -> np.ndarray:
    """Reduce values < 2^63 into [0, p) using 2^61 = 1 (mod p)."""
    v = (v & _P) + (v >> _S61)
    return np.where(v >= _P, v - _P, v)


def _mulmod61(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """(a * x) mod p for broadcastable uint64 arrays with a, x < p."""
    a_hi = a >> _S31
    a_lo = a & _MASK31
    x_hi = x >> _S31
    x_lo = x & _MASK31
    # a*x = a_hi*x_hi*2^62 + (a_hi*x_lo + a_lo*x_hi)*2^31 + a_lo*x_lo
    term1 = (a_hi * x_hi) << np.uint64(1)  # 2^62 = 2 (mod p); stays < 2^61
    mid = a_hi * x_lo + a_lo * x_hi  # < 2^62
    term2 = (mid >> _S30) + ((mid & _MASK30) << _S31)  # mid*2^31 folded
    term3 = _fold61(a_lo * x_lo)
    return _fold61(term1 + term2 + term3)  # sum < 2^63


def min_hash(shingles: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column minima of h_i(x_j) = (a_i * x_j + b_i) mod p; see the .pyx twin."""
    xs = np.ascontiguousarray(shingles, dtype=np.uint64)
    av = np.ascontiguousarray(a, dtype=np.uint64)
    bv = np.ascontiguousarray(b, dtype=np.uint64)
    n = xs.shape[0]
    k = av.shape[0]
    if n == 0:
        raise ValueError("empty shingle set")
    if bv.shape[0] != k:
        raise ValueError("a and b length mismatch")

    xs = _fold61(xs)
    out = np.empty(k, dtype=np.uint64)
    step = max(1, _CHUNK_CELLS // max(n, 1))
    for start in range(0, k, step):
        stop = min(start + step, k)
        h = _mulmod61(av[start:stop, None], xs[None, :]) + bv[start:stop, None]
        h = np.where(h >= _P, h - _P, h)
        out[start:stop] = h.min(axis=1)
    return out
