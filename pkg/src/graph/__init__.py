from src.graph.ecosystem_graph import ACT, SH, EcosystemGraph, sharing_edges

__all__ = ["ACT", "SH", "EcosystemGraph", "sharing_edges"]
