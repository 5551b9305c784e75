import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "bhdetect._kernels._dbscan_cy",
                ["src/bhdetect/_kernels/_dbscan_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
else:
    # No Cython available: install the pure-Python package only; the
    # kernel selector falls back to the numpy implementation at import.
    ext_modules = []

setup(ext_modules=ext_modules)
