"""Whitney-cube geometry, harmonic norms and Carleson embedding checks."""

__version__ = "0.1.0"
