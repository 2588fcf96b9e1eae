"""Community recovery on geometrically-noised stochastic block models."""

from geonoise.graph import WeightedGraph, build_graph, weighted_degrees

__version__ = "0.1.0"

__all__ = ["WeightedGraph", "build_graph", "weighted_degrees", "__version__"]
