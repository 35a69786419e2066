import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; seqmag falls back to numpy kernels
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("SEQMAG_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "seqmag._kernels",
                ["src/seqmag/_kernels.pyx"],
                extra_compile_args=["-O3", "-fno-math-errno"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
