"""Offline figure rendering for cgns pipeline artifacts.

Consumes only the CSV/JSON files listed in a run manifest; never recomputes
any science. Each renderer returns the checksums of the arrays it plotted so
callers can verify they match the source files byte-for-byte.
"""

from .figures import FigureSpec, MissingInputError, RenderResult, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "MissingInputError", "RenderResult", "render",
           "__version__"]
