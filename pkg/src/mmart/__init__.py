"""Multi-modal retrieval for paintings.

Encodes painting comments/titles/attributes and visual features into a
shared 128-dimensional space and evaluates comment<->painting retrieval.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, MmartError, NumericError

__all__ = ["ConfigError", "DataError", "MmartError", "NumericError", "__version__"]
