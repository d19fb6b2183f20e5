"""Synthetic text-line images for visually rich documents, and OCR scoring."""
__version__ = "0.1.0"
