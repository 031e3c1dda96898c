"""Turn a directory of painting images into an MMAF visual-feature file."""

__version__ = "0.1.0"
