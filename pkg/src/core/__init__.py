"""Spherical geometry, location vectors and sampling primitives."""
