"""Build hook for the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and the
pure-Python kernels are used at runtime.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("condsym._kernels", ["src/condsym/_kernels.pyx"], extra_compile_args=["-O3"], optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
