"""Numerical laboratory for one-sided minimal hypersurfaces near cylindrical minimal cones."""

__version__ = "0.1.0"
