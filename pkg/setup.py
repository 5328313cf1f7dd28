import os

import numpy as np
from setuptools import Extension, setup

# Set DGLASSO_NO_EXT=1 to install the pure-Python package only.
ext_modules = []
if not os.environ.get("DGLASSO_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                f"dglasso.{name}",
                [f"src/dglasso/{name}.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
            for name in ("_kalman_ext", "_inner_ext")
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "initializedcheck": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
