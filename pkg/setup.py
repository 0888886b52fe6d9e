"""Build script: compiles the optional split-scan extension.

The extension is a pure speedup; if no compiler (or Cython) is available the
install still succeeds and the package falls back to the numpy kernels.
Set SALESFOREST_SKIP_EXT=1 to skip the compile step entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing toolchain
            self._skip(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._skip(exc)

    @staticmethod
    def _skip(exc):
        print(f"warning: building the compiled kernel failed ({exc}); "
              "salesforest will use the pure-numpy fallback", file=sys.stderr)


def extensions():
    if os.environ.get("SALESFOREST_SKIP_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("warning: Cython not available; skipping compiled kernel",
              file=sys.stderr)
        return []
    ext = Extension(
        "salesforest.forest._kernel",
        sources=["src/salesforest/forest/_kernel.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
