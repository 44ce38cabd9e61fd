"""Numerical laboratory for boundary entropy functionals on moving planar domains."""

from .geometry import AnalyticDomain, PlanarCurve, load_domain

__all__ = ["AnalyticDomain", "PlanarCurve", "load_domain"]
__version__ = "0.1.0"
