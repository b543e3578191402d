"""Retrieval-augmented repository-level code completion with query enhancement."""

__version__ = "0.1.0"
