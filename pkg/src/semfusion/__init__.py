"""Concept-level text/image fusion for medical case retrieval."""

__version__ = "0.1.0"
