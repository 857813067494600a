"""Build the optional compiled kernels.

The package works without them; ``tsbapc.kernels`` falls back to the
pure-Python implementation when the extension is missing.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("TSBAPC_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "tsbapc._ckernels",
                ["src/tsbapc/_ckernels.pyx"],
                extra_compile_args=["-O3", "-fno-fast-math", "-ffp-contract=off"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
