from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # fall back to the pure-Python inner loops
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("tor_lab.solvers._smo_ext", ["src/tor_lab/solvers/_smo_ext.pyx"],
                   extra_compile_args=["-O3"], optional=True)],
        language_level=3,
    )

setup(ext_modules=ext_modules)
