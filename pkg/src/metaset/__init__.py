"""Diverse subset selection for metamaterial unit-cell datasets."""

__version__ = "0.1.0"
