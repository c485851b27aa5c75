"""Build script for the optional compiled kernels.

The package works without the extension (a pure-numpy fallback is selected
at import time); the extension only makes training faster. `optional=True`
keeps installation alive on toolchain-less machines.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    numpy = None
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "aircal._kernels._cyimpl",
                ["src/aircal/_kernels/_cyimpl.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    extensions = []

setup(ext_modules=extensions)
