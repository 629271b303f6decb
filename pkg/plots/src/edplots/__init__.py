"""Figure rendering for entrodyn run outputs.

Reads only the documented snapshot, series, and manifest formats;
never imports the simulation library.
"""

__version__ = "0.1.0"

from .figures import FIGURE_KINDS, render

__all__ = ["FIGURE_KINDS", "render", "__version__"]
