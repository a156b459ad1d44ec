"""Spectral statistics of quantum graphs (Python bindings of the qgraph C++ library)."""

from ._core import *  # noqa: F401,F403
from ._core import NumericalError, ValidationError, __doc__  # noqa: F401

__version__ = "0.1.0"
