"""Select the compiled search kernel, falling back to pure Python."""

from __future__ import annotations

import os

from . import _kernel_py

BACKEND = "python"
search = _kernel_py.search

if not os.environ.get("HEDLUND_PURE_PYTHON"):
    try:
        from . import _kernel  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "compiled"
        search = _kernel.search


def get_search(backend: str | None = None):
    """Return the kernel for ``backend`` (``"compiled"``, ``"python"`` or default)."""
    if backend is None:
        return search
    if backend == "python":
        return _kernel_py.search
    if backend == "compiled":
        from . import _kernel  # type: ignore[attr-defined]
        return _kernel.search
    raise ValueError(f"unknown backend {backend!r}")
