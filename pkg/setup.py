"""Builds the optional compiled kernel.

Set ISTRUTTORE_NO_EXT=1 to skip the extension; the package then uses the
pure-Python fallback selected at import time.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("ISTRUTTORE_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "istruttore._kernels._lcs",
                    ["src/istruttore/_kernels/_lcs.pyx"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
