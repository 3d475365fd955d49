"""Build script for the optional compiled series kernels.

The package is pure Python plus one Cython extension holding the hot
IGSO(3) series loops.  The extension is optional: if Cython or a C
compiler is unavailable the install still succeeds and the package falls
back to the NumPy implementation at import time.
"""

import numpy
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "se3diffuse._kernels._series_cy",
                sources=["src/se3diffuse/_kernels/_series_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
