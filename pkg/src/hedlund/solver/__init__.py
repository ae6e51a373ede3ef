"""Shortest paths in the abelian cover under a periodic conformal metric."""

from .backend import BACKEND
from .stencil import stencil_offsets, stencil_overhead

__all__ = ["BACKEND", "stencil_offsets", "stencil_overhead"]
