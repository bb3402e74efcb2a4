"""Radial solver and verification harness for porous-medium equations with power sources."""

__version__ = "0.1.0"
