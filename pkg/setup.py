from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    # Pure-python fallback backend is selected at import time when the
    # extension is absent, so a build without Cython still works.
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "bdsde._kernels",
                ["src/bdsde/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
