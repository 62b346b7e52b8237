"""Build the optional compiled sweep kernel.

Without Cython (or a C compiler) the package still installs and falls back
to the numpy implementation at import time.
"""

import os

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler: keep the pure-python install
            print(f"warning: compiled kernel not built ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: {ext.name} not built ({exc})")


pyx = os.path.join("src", "plsrod", "_sweep.pyx")
ext = Extension(
    "plsrod._sweep",
    [pyx],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3"],
)
try:
    from Cython.Build import cythonize

    extensions = cythonize([ext], compiler_directives={"language_level": "3"})
except ImportError:
    c_src = pyx[:-4] + ".c"
    extensions = [Extension(ext.name, [c_src], include_dirs=ext.include_dirs)] if os.path.exists(c_src) else []

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})
