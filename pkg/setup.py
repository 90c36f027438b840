"""Build script: compiles the active-set QP kernel when Cython and a C
compiler are available.  The package installs and runs without the extension
(the pure-Python twin is selected at import time)."""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "platoon_smpc.qp._active_set_cy",
                ["src/platoon_smpc/qp/_active_set_cy.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
