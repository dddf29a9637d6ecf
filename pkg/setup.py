"""Build the optional Cython kernels.

If Cython or a C compiler is unavailable the package still installs and
falls back to the numpy kernels at import time.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("PUMINE_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "pumine._kernels._ckernels",
                    ["src/pumine/_kernels/_ckernels.pyx"],
                    # no -ffast-math: kernels must match the numpy path bit for bit
                    extra_compile_args=["-O3", "-fopenmp", "-ffp-contract=off"],
                    extra_link_args=["-fopenmp"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
