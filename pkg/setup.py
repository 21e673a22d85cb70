import sys

from setuptools import Extension, setup

# The compiled kernels are an optional speedup; the package falls back to the
# pure-Python implementations in stormlet.kernels when the extension is absent.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("stormlet._ckernels", ["src/stormlet/_ckernels.pyx"])],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover
    print(f"warning: building without compiled kernels ({exc})", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
