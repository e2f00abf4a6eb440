"""Soft embedding augmentation with soft labels for dialogue generation."""

__version__ = "0.1.0"
