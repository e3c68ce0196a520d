import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

# python setup.py build_ext --inplace   (or just pip install -e . --no-build-isolation)
# The compiled module is optional: darkemit falls back to the pure-numpy
# backend in darkemit/_kernels/pyref.py when the import fails.
extensions = [
    Extension(
        "darkemit._kernels._core",
        sources=["src/darkemit/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
