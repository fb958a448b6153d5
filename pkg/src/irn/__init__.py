"""Interaction relational networks for two-person action recognition."""

__version__ = "0.1.0"
