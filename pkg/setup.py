import os

from setuptools import Extension, setup


def extensions():
    """Build the MinHash kernel unless explicitly disabled or Cython is absent.

    The package works without the extension: mtforge.dedup falls back to the
    NumPy implementation at import time.
    """
    if os.environ.get("MTFORGE_PURE_PYTHON"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "mtforge._minhash",
        ["src/mtforge/_minhash.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize(ext, language_level=3)


setup(ext_modules=extensions())
