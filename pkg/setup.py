import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; wncs falls back at import
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("WNCS_NO_EXT"):
    extra = [] if sys.platform == "win32" else ["-O2", "-ffp-contract=off"]
    ext_modules = cythonize(
        [
            Extension(
                "wncs._ckernels",
                ["src/wncs/_ckernels.pyx"],
                include_dirs=[np.get_include(), "src/wncs"],
                extra_compile_args=extra,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
