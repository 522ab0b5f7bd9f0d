"""Cycles, gap vectors and phantom cycles of proximal maps composed with
isometric roots of the identity."""

__version__ = "0.1.0"
