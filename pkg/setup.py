"""Build script for the optional compiled neighbor-search / DBSCAN core.

The package works without the extension: radarseg.kernels falls back to a
pure-numpy implementation with identical semantics. The extension only makes
the hot loops faster.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "radarseg._gridcore",
                ["src/radarseg/_gridcore.pyx"],
                include_dirs=[np.get_include()],
                # keep float arithmetic bit-identical to the numpy fallback
                extra_compile_args=["-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
