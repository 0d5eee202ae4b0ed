"""Numerical conformal deformations of hypersurfaces in codimension two."""

__version__ = "0.1.0"
