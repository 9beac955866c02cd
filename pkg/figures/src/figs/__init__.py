"""Read-only figure scripts for dcrs sweep CSVs and codebook files.

These scripts never recompute physics; they parse the experiment CLI's
outputs, interpolate where a figure needs it (crossing annotations), and
draw.
"""

from figs.io import FigureInputError, read_codebook, read_sweep_csv
from figs.render import FigureSpec, compute_crossing, render

__all__ = [
    "FigureInputError",
    "FigureSpec",
    "compute_crossing",
    "read_codebook",
    "read_sweep_csv",
    "render",
]
