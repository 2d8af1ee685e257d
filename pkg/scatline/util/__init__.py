"""Utility helpers for the scatline package: file I/O, fitting, quadrature and worker pools."""
