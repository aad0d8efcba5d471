"""Shifted Funk, parallel slice and Radon-John transforms on the unit sphere and ball."""

__version__ = "0.1.0"
