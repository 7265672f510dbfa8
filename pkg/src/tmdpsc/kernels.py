"""Kernel selection: the compiled extension when it was built, else pure Python.

Set TMDPSC_PURE_PYTHON=1 to force the fallback.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("TMDPSC_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend or python_backend
BACKEND_NAME = "cython" if compiled_backend is not None and backend is compiled_backend else "python"


def use(name):
    """Switch backend at runtime ('cython' or 'python')."""
    global backend, BACKEND_NAME
    if name == "cython":
        if compiled_backend is None:
            raise RuntimeError("compiled kernels are not available")
        backend = compiled_backend
    elif name == "python":
        backend = python_backend
    else:
        raise ValueError(name)
    BACKEND_NAME = name


def cg_closure(trans, m, seeds, start):
    return backend.cg_closure(trans, m, seeds, start)


def join_labels(lab1, lab2):
    return backend.join_labels(lab1, lab2)
