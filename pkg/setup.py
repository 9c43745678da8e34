import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "gqvar._core",
        ["src/gqvar/_core.pyx"],
        include_dirs=[np.get_include()],
        # no -ffast-math: it would reorder away the compensated sums
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
