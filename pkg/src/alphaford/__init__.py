"""Alpha-Ford random cladograms, chains on cladogram space, and subtree-mass moments."""

from alphaford.cladogram import (
    Cladogram,
    StructureError,
    enumerate_cladograms,
    from_newick,
    num_cladograms,
    shape,
    to_newick,
)
from alphaford.tree import FiniteMeasureTree

__version__ = "0.1.0"

__all__ = [
    "Cladogram",
    "FiniteMeasureTree",
    "StructureError",
    "enumerate_cladograms",
    "from_newick",
    "num_cladograms",
    "shape",
    "to_newick",
    "__version__",
]
