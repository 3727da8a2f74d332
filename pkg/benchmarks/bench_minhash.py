"""Benchmark the MinHash signature kernels: compiled vs NumPy vs big-int.

Usage: python benchmarks/bench_minhash.py [--docs 2000] [--k 128] [--tokens 200]

Signs a synthetic corpus with each available backend and reports throughput.
The big-int reference is exact but slow; it runs on a small subset and its
throughput is extrapolated from that subset.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mtforge import _minhash_py
from mtforge.minlsh import MERSENNE61, hash_params

try:
    from mtforge import _minhash
except ImportError:
    _minhash = None


def bigint_min_hash(shingles, a, b):
    return [
        min((int(ai) * (int(x) % MERSENNE61) + int(bi)) % MERSENNE61 for x in shingles)
        for ai, bi in zip(a, b)
    ]


def make_corpus(n_docs, tokens_per_doc, seed=0):
    rng = np.random.default_rng(seed)
    return [
        rng.integers(0, 1 << 64, size=tokens_per_doc, dtype=np.uint64) for _ in range(n_docs)
    ]


def run(name, fn, corpus, a, b, k):
    start = time.perf_counter()
    for shingles in corpus:
        fn(shingles, a, b)
    elapsed = time.perf_counter() - start
    hashes = len(corpus) * k * len(corpus[0])
    print(
        f"{name:<10} {len(corpus):>6} docs  {elapsed:8.3f}s  "
        f"{len(corpus) / elapsed:10.1f} docs/s  {hashes / elapsed / 1e6:8.1f} Mhash/s"
    )
    return elapsed


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=2000)
    parser.add_argument("--k", type=int, default=128)
    parser.add_argument("--tokens", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    corpus = make_corpus(args.docs, args.tokens, args.seed)
    a, b = hash_params(args.k, args.seed)

    print(f"k={args.k}, {args.tokens} shingles/doc")
    if _minhash is not None:
        run("cython", _minhash.min_hash, corpus, a, b, args.k)
    else:
        print("cython     (extension not built)")
    run("numpy", _minhash_py.min_hash, corpus, a, b, args.k)
    subset = corpus[: max(1, args.docs // 100)]
    run("bigint", bigint_min_hash, subset, a, b, args.k)

    # correctness spot-check across backends
    sample = corpus[0]
    ref = bigint_min_hash(sample, a, b)
    assert [int(v) for v in _minhash_py.min_hash(sample, a, b)] == ref
    if _minhash is not None:
        assert [int(v) for v in _minhash.min_hash(sample, a, b)] == ref
    print("all backends agree on the spot-check")


if __name__ == "__main__":
    main()
