"""Assembly kernels with a compiled backend and a numpy fallback.

The backend is picked at import: the Cython extension when it was built,
numpy otherwise.  ``MASSFREE_BACKEND=python`` forces the fallback.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("MASSFREE_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend or python_backend
BACKEND = "cython" if compiled_backend is not None and _active is compiled_backend else "python"


def use_backend(name: str) -> None:
    """Switch the active backend ("cython" or "python")."""
    global _active, BACKEND
    if name == "cython":
        if compiled_backend is None:
            raise RuntimeError("compiled kernels are not available")
        _active = compiled_backend
    elif name == "python":
        _active = python_backend
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name


def scatter_apply(mats, dofs, u, out):
    _active.scatter_apply(mats, dofs, u, out)


def scatter_add(local, dofs, out):
    _active.scatter_add(local, dofs, out)
