"""Desk-scale workbench for the function-field circle method."""

__version__ = "0.1.0"
