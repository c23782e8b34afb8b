"""Standalone figure renderer for mpaqkd CSV reports.

Couples to the simulator only through the CSV column names, so the two
packages can be installed and upgraded independently.
"""

from .render import KINDS, MissingColumnsError, load_table, render_kind, save_figure

__all__ = [
    "KINDS",
    "MissingColumnsError",
    "load_table",
    "render_kind",
    "save_figure",
]

__version__ = "0.1.0"
