"""Memory-associated differential learning for link prediction and regression."""

__version__ = "0.1.0"
