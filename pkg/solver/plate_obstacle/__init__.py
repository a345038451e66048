"""Obstacle problems for clamped Kirchhoff plates: flat-top PUM, PDAS and additive Schwarz PCG."""

__version__ = "1.0.0"
