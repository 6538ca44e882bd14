"""Build hook for the optional Cython kernel extension.

The extension is marked optional: if Cython or a C compiler is missing the
install still succeeds and ``gexprobe.kernels`` falls back to the numpy
implementation. Set ``GEXPROBE_NO_EXT=1`` to skip the build on purpose.
"""
import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("GEXPROBE_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "gexprobe._kernels_ext",
        ["src/gexprobe/_kernels_ext.pyx"],
        extra_compile_args=["-O3"],
        optional=True,
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
