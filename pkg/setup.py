import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    extensions = cythonize(
        [Extension("pintbounds._sturm", ["src/pintbounds/_sturm.pyx"],
                   include_dirs=[numpy.get_include()])],
        language_level=3)
except ImportError:
    # pure-Python fallback is selected at import time
    extensions = []

setup(ext_modules=extensions)
