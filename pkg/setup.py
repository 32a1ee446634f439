"""Build the optional Cython kernels; the package falls back to numpy without them."""
import os

import numpy as np
from setuptools import Extension, setup

extensions = []
if not os.environ.get("UNCAGE_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = cythonize(
            [
                Extension(
                    "uncage._ckernels",
                    ["src/uncage/_ckernels.pyx"],
                    depends=["src/uncage/_simd.h"],
                    include_dirs=[np.get_include()],
                    # no FMA contraction: keeps results bitwise equal to the numpy path
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=extensions)
