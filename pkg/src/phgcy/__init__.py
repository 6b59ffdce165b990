"""Polyhomogeneous asymptotics toolkit for degenerating Calabi-Yau metrics."""

__version__ = "0.1.0"
