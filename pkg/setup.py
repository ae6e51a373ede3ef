import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # sdist without Cython: ship the pure-Python kernel only
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("HEDLUND_NO_EXTENSION"):
    ext_modules = cythonize(
        [
            Extension(
                "hedlund.solver._kernel",
                ["src/hedlund/solver/_kernel.pyx"],
                include_dirs=[np.get_include()],
                language="c++",
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
