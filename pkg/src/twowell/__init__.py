"""Convex-integration constructions for the planar two-well inclusion."""

__version__ = "0.1.0"
