"""Builds the optional compiled kernel; the package works without it."""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    pass
else:
    ext_modules = cythonize(
        [Extension("resetsg._kernel", ["src/resetsg/_kernel.pyx"], include_dirs=[numpy.get_include()])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
