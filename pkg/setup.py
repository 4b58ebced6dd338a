"""Build script for the optional compiled solver kernel.

The package works without the extension (a numpy fallback is selected at
import time), so the extension is marked optional: a missing compiler or
Cython only costs speed, not functionality.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - source-only install
    ext_modules = []
else:
    extensions = [
        Extension(
            name="sccanet._core",
            sources=["src/sccanet/_core.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=[
                "-O3",
                "-DNPY_NO_DEPRECATED_API=NPY_1_9_API_VERSION",
            ],
            optional=True,
        )
    ]
    ext_modules = cythonize(extensions, language_level="3")

setup(ext_modules=ext_modules)
