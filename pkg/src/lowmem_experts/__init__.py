"""Low-memory learning with expert advice."""

__version__ = "0.1.0"
