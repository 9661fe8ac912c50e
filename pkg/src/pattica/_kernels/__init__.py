"""Kernel backend selection.

Two interchangeable implementations of the hot loops live here:

* ``_core``  -- compiled extension, built at install time
* ``_pyref`` -- pure NumPy/Python reference

The active backend is chosen once at import from the ``PATTICA_BACKEND``
environment variable:

* ``auto`` (default): compiled if the extension imported, else python
* ``compiled``: require the extension, raise ImportError otherwise
* ``python``: force the reference implementation

Both backends expose the same five functions with identical signatures
and, for the integer-count and reordered-accumulation kernels, identical
results bit for bit.  See each module's docstring for the contract.
"""

from __future__ import annotations

import os

from . import _pyref

try:
    from . import _core
except ImportError:
    _core = None


def _select(mode: str):
    if mode == "python":
        return _pyref
    if mode == "compiled":
        if _core is None:
            raise ImportError(
                "PATTICA_BACKEND=compiled but the compiled extension is not "
                "available; reinstall the package or use PATTICA_BACKEND=python"
            )
        return _core
    if mode == "auto":
        return _core if _core is not None else _pyref
    raise ImportError(
        f"PATTICA_BACKEND={mode!r} not recognised; "
        "expected 'auto', 'compiled' or 'python'"
    )


_impl = _select(os.environ.get("PATTICA_BACKEND", "auto").strip().lower())

BACKEND = _impl.NAME

count_ones = _impl.count_ones
sum_grad_hess = _impl.sum_grad_hess
kmeans_assign = _impl.kmeans_assign
tree_predict = _impl.tree_predict
shap_tree = _impl.shap_tree


def available_backends():
    """Names of the backends importable in this environment."""
    names = ["python"]
    if _core is not None:
        names.insert(0, "compiled")
    return names


def get_backend(name: str):
    """Return the backend module by name, for side-by-side comparison."""
    if name == "python":
        return _pyref
    if name == "compiled":
        if _core is None:
            raise ImportError("compiled backend not available")
        return _core
    raise ValueError(f"unknown backend {name!r}")
