"""Build hook for the optional compiled spanning kernel.

The package works without it (a pure-python fallback ships alongside), so
a missing compiler or Cython only costs speed, never the install.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - degrade, don't fail
            print(f"skipping compiled kernel build: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"skipping {ext.name}: {exc}")


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        [
            Extension(
                "akltmqc._spanning",
                ["src/akltmqc/_spanning.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
