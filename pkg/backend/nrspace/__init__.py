"""Curvature, Jacobi fields and geodesic volumes on naturally reductive homogeneous spaces."""

__version__ = "0.1.0"
