"""Exact finite-scale computations on Diestel-Leader graphs and their boundaries."""
from .boundary import BoundaryPoint, Clone, CloneSet, parse_clone, parse_clone_set, qn_distance, separation
from .dlgraph import Box, DLVertex, build_box, dl_distance, folner_scan, r_boundary
from .qmaps import PiecewiseMap, Similarity, compose, invert, parse_map
from .lift import SolPoint, VertexMap, build_psi, clone_box, pi, pi_bar, up_map
from .ufh import UFChain, EdgeChain, boundary, bounded_matching, pushforward, whyte_scan

__all__ = [
    "BoundaryPoint", "Clone", "CloneSet", "parse_clone", "parse_clone_set", "qn_distance", "separation",
    "Box", "DLVertex", "build_box", "dl_distance", "folner_scan", "r_boundary",
    "PiecewiseMap", "Similarity", "compose", "invert", "parse_map",
    "SolPoint", "VertexMap", "build_psi", "clone_box", "pi", "pi_bar", "up_map",
    "UFChain", "EdgeChain", "boundary", "bounded_matching", "pushforward", "whyte_scan",
]
