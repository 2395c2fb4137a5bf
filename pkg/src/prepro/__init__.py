"""Exact computations with preprojective algebras, their deformations and
the associated quiver varieties."""

__version__ = "0.1.0"
