"""Builds the optional compiled decoder kernels.

When Cython or a C compiler is missing the package still installs and
falls back to the numpy kernels at import time.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("biascal._kernels", ["src/biascal/_kernels.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3", "-ffp-contract=off"],
                   optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
