"""Exact counting, spatial-mixing certificates and capacity estimates for 2D hard constraints."""

__version__ = "0.1.0"
