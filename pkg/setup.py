import os

from setuptools import Extension, setup

# The compiled kernels are optional: set HEUREVO_NO_EXT=1 (or build without
# Cython installed) to get a pure-Python install; heurevo.kernels falls back
# automatically at import time.
ext_modules = []
if os.environ.get("HEUREVO_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("heurevo._speedups", ["src/heurevo/_speedups.pyx"])],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
