"""Build script for the optional compiled solver core.

The package works without the extension (a NumPy fallback is selected at
import time); building it makes the block BPDN inner loop several times
faster, which matters for full-size sweeps.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "blockcs._pdhg",
                ["src/blockcs/_pdhg.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    # No Cython/NumPy at build time: install pure-Python only.
    pass

setup(ext_modules=ext_modules)
