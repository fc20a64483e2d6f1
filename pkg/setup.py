import os

import numpy as np
from setuptools import Extension, setup

# QUENCHWALL_NO_EXT=1 installs the pure-Python package only.
ext_modules = []
if not os.environ.get("QUENCHWALL_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "quenchwall.engine._kernels",
                ["src/quenchwall/engine/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
