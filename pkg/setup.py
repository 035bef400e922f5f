"""Build script for the optional compiled kernels.

The package works without the extension (qkit.backend falls back to the
pure NumPy kernels); set QKIT_NO_EXT=1 to skip compilation entirely.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("QKIT_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "qkit._kernels",
                    ["src/qkit/_kernels.pyx"],
                    extra_compile_args=["-O3", "-fopenmp"],
                    extra_link_args=["-fopenmp"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython available: ship the pure-Python fallback only.
        ext_modules = []

setup(ext_modules=ext_modules)
