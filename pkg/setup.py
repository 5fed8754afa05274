import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


class optional_build_ext(build_ext):
    """Compile the kernel if possible; otherwise the numpy fallback is used."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "ladderdyn._ext.kernels",
                ["src/ladderdyn/_ext/kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
