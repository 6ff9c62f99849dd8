"""Core simulation building blocks."""
