"""Figure scripts for qmonitor outputs.

Pure post-processing: every panel is a deterministic function of the CSV/JSON
files written by the ``qmonitor`` command line tool; no physics is recomputed.
"""

from .figures import FigureSpec, SchemaError, render

__all__ = ["FigureSpec", "SchemaError", "render"]

__version__ = "0.1.0"
