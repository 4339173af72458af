"""Radial shooting for the p-Laplacian with sublinear-superlinear nonlinearities."""

__version__ = "0.1.0"
