"""Toroidal dimer models, spanning-forest bijections, and phase diagrams."""

__version__ = "0.1.0"

from .lattice import (
    GraphSpecError,
    PeriodicGraph,
    TorusGraph,
    DualGraph,
    DoubleGraph,
    DualPaths,
    WiredGraph,
    parse_graph_spec,
    build_quotient,
    build_dual,
    build_double,
    build_wired,
    choose_dual_paths,
)
from .laurent import LaurentPoly, newton_polygon

__all__ = [
    "GraphSpecError", "PeriodicGraph", "TorusGraph", "DualGraph", "DoubleGraph",
    "DualPaths", "WiredGraph", "parse_graph_spec", "build_quotient", "build_dual",
    "build_double", "build_wired", "choose_dual_paths", "LaurentPoly",
    "newton_polygon",
]
