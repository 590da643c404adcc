"""Build script for the optional compiled SMO kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes SVM training much faster.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("GAITFORGE_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "gaitforge._smo",
                    ["src/gaitforge/_smo.pyx"],
                    include_dirs=[numpy.get_include()],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
