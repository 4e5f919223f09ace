"""Figure scripts for minorlab CSV artifacts (sweeps, TV curves, density
dumps, sumset growth).  Coupled to the pipeline only through the file
formats."""

from .figures import KINDS, plot
from .schemas import SchemaError

__all__ = ["KINDS", "SchemaError", "plot"]
