"""Build script with an optional compiled kernel.

The package works without the extension (a numpy fallback is selected at
import time), so any failure to compile is reported and then ignored.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, otherwise fall back silently."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or Cython missing
            print(f"[setup] skipping compiled kernels ({exc}); "
                  "pure-python backend will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"[setup] failed to build {ext.name} ({exc}); "
                  "pure-python backend will be used")


def extensions():
    import os
    if not os.path.exists("src/seapack/_kernels.pyx"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"[setup] {exc}; building without compiled kernels")
        return []
    ext = Extension(
        "seapack._kernels",
        ["src/seapack/_kernels.pyx"],
        include_dirs=[np.get_include()],
    )
    return cythonize(ext, language_level=3)


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
