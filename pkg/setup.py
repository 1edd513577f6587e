import os

import numpy
from setuptools import Extension, setup

# The compiled core is optional: the package falls back to pure-numpy kernels
# when the extension is absent (see lanczos_lab._backend).
ext_modules = []
if not os.environ.get("LANCZOS_LAB_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "lanczos_lab._ddcore",
                    sources=["src/lanczos_lab/_ddcore.pyx"],
                    include_dirs=[numpy.get_include()],
                    # -ffp-contract=off: the error-free transformations rely on
                    # individually rounded multiply/add; FMA contraction breaks them.
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "initializedcheck": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
