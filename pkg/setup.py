"""Build script for the optional compiled enumeration kernels.

The package is fully functional without the extension: subdyn.kernels falls
back to the numpy implementations in subdyn._kernels_np when the compiled
module is absent.  A failed compile therefore degrades quietly instead of
breaking the install.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that downgrades compiler failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            print(f"WARNING: compiled kernels not built ({exc}); "
                  "falling back to the numpy implementations")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"WARNING: skipping {ext.name} ({exc}); "
                  "falling back to the numpy implementations")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "subdyn._kernels",
        ["src/subdyn/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
