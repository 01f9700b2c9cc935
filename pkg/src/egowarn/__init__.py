"""Egocentric pedestrian collision warning engine and scenario bench."""

__version__ = "0.1.0"
