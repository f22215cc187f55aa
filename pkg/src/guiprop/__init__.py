"""Exploration-driven property synthesis and property-based testing for GUI apps."""

__version__ = "0.1.0"
