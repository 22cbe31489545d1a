"""Builds the optional compiled kernel; the package works without it."""
import os

from setuptools import setup


def _extensions():
    if os.environ.get("LEAN_TVR_PURE_PYTHON", "") not in ("", "0"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension("lean_tvr._pairgraph", ["src/lean_tvr/_pairgraph.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"], optional=True)
    return cythonize([ext], compiler_directives={"language_level": 3})


setup(ext_modules=_extensions())
