"""Radial MRI reconstruction with a coordinate network trained on projection rendering."""

__version__ = "0.1.0"
