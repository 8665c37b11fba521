"""Enhancement bond percolation laboratory.

Monte Carlo and exact-enumeration tools for bond percolation on boxes and
tori of Z^d in which open copies of a pattern ``T`` activate an enhanced
edge set ``S``, plus the continuum Poisson-disk processes used to compare
against it.
"""

from .lattice import Box, Torus, LatticeRotation, rotations, edges_of_box, edges_of_torus
from .bond_config import BondConfig, UniformField, sample, threshold, uniform_field
from .enhancement import Enhancement, EnhancementFamily, EnhancedGraph, load_family
from .connectivity import UnionFind, ClusterIndex, build_index, crossing, one_arm, cluster_stats
from .mc_estimator import Estimate, InequalityReport, estimate, sweep

__version__ = "0.1.0"

__all__ = [
    "Box", "Torus", "LatticeRotation", "rotations", "edges_of_box", "edges_of_torus",
    "BondConfig", "UniformField", "sample", "threshold", "uniform_field",
    "Enhancement", "EnhancementFamily", "EnhancedGraph", "load_family",
    "UnionFind", "ClusterIndex", "build_index", "crossing", "one_arm", "cluster_stats",
    "Estimate", "InequalityReport", "estimate", "sweep",
]
