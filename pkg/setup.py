"""Builds the optional compiled kernels.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); the extension only accelerates the convolution and
pooling inner loops.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "learntrace.autodiff.kernels._convkernels",
                ["src/learntrace/autodiff/kernels/_convkernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"warning: compiled kernels disabled ({exc}); using NumPy fallback", file=sys.stderr)

setup(ext_modules=ext_modules)
