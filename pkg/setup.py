"""Build script for the optional compiled LSTM kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a missing compiler or Cython only costs speed. Set
MIFUSION_NO_EXT=1 to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("MIFUSION_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "mifusion.kernels._lstm",
                    sources=["src/mifusion/kernels/_lstm.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
