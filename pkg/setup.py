"""Build hook for the optional compiled kernel backend.

The package works without the extension; criticgate.kernels falls back to the
pure Python implementation when the compiled module is absent.  Set
CRITICGATE_NO_EXT=1 to skip the build entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    # A missing compiler must not break installation.
    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"skipping compiled kernels: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"skipping {ext.name}: {exc}")


# gcc pairs adjacent sin/cos calls into glibc sincos, whose last-ulp rounding
# can differ from the separate libm calls the pure backend makes through the
# math module.  Forbid the substitution so both backends agree bit for bit.
if sys.platform.startswith(("linux", "darwin")):
    STRICT_LIBM = ["-fno-builtin-sin", "-fno-builtin-cos", "-fno-builtin-sincos"]
else:
    STRICT_LIBM = []

ext_modules = []
if os.environ.get("CRITICGATE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("criticgate._kernels_cy",
                       ["src/criticgate/_kernels_cy.pyx"],
                       extra_compile_args=STRICT_LIBM)],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
