"""Numerical checks for maximal-entropy real polynomial diffeomorphisms of the plane."""

__version__ = "0.1.0"

from .map_core import ElementaryFactor, PolyDiffeo, composition, henon  # noqa: E402

__all__ = ["ElementaryFactor", "PolyDiffeo", "composition", "henon", "__version__"]
