"""Build shim for the optional compiled kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time), so a missing compiler or Cython must not fail the install.
"""
import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible; warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"warning: compiled kernels skipped ({exc}); "
              "using the pure-Python fallback")


ext_modules = []
if os.environ.get("AMMTUNER_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("ammtuner._kernels", ["src/ammtuner/_kernels.pyx"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        print("warning: Cython unavailable; compiled kernels skipped")

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
