"""Build hook: compile the optional throw-simulation kernel.

The package is fully functional as pure Python. When Cython and a C
compiler are available, ``urnrates._throws`` is built from
``src/urnrates/_throws.pyx`` and the simulator picks it up at import
time; otherwise the install proceeds without it and the pure-numpy
lane is used.
"""

import sys

from setuptools import setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    try:
        return cythonize(
            ["src/urnrates/_throws.pyx"],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
            include_path=[numpy.get_include()],
        )
    except Exception as exc:  # missing compiler, stale cython, ...
        sys.stderr.write(f"skipping compiled kernel: {exc}\n")
        return []


ext_modules = extensions()
include_dirs = []
if ext_modules:
    import numpy

    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())

setup(ext_modules=ext_modules)
