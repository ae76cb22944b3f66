# Builds the optional compiled core. If compilation fails the package still
# installs and falls back to the numpy kernels at import time.
import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "biomotion._core",
        ["src/biomotion/_core.pyx"],
        include_dirs=[np.get_include()],
        # no fast-math / fp contraction: compiled and numpy paths must agree bit for bit
        extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
