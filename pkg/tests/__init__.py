"""Test package for scatline.

Tests are organised by service module plus the command line, and aim
to cover both the closed-form cases and the error paths. Shared
fixtures and independent oracles live in ``conftest.py``.
"""
