import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext = Extension(
    "fedsleep._kernels._core",
    ["src/fedsleep/_kernels/_core.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3", "-march=native", "-funroll-loops", "-ffast-math"],
)

if cythonize is not None:
    setup(ext_modules=cythonize([ext], language_level=3))
else:
    # No Cython available: install pure-Python; the package falls back to the
    # NumPy kernels at import time.
    setup()
