"""
Static undirected social graph between agents.

Nodes are the agent ids 0..n-1. The graph is read from an edge list with one
``u v`` pair per line or drawn at random.
"""

import logging
from typing import Dict, Iterable, List, Optional, Tuple, Union

import networkx as nx

from src.models.exceptions import ConfigError, FileUnreadable, FormatError

logger = logging.getLogger(__name__)


def read_edge_list(path: str, numeric: bool = False) -> Tuple[nx.Graph, int]:
    """
    Parse a whitespace-separated edge list with ``nx.parse_edgelist``.

    Lines without exactly two endpoints, or with endpoints that are not
    non-negative integers when ``numeric`` is set, are dropped and counted
    before parsing. Self-loops are ignored without being counted. Text after
    ``#`` is a comment.

    Returns:
        Tuple of the graph and the number of malformed lines
    """
    pairs = []
    skipped = 0
    try:
        with open(path) as handle:
            for line in handle:
                parts = line.split("#", 1)[0].split()
                if not parts:
                    continue
                if len(parts) != 2 or (numeric and not all(p.isascii() and p.isdigit() for p in parts)):
                    skipped += 1
                    continue
                if parts[0] != parts[1]:
                    pairs.append(" ".join(parts))
    except OSError as e:
        raise FileUnreadable(f"Cannot read social graph {path}: {e}") from e
    if skipped:
        logger.warning(f"Skipped {skipped} malformed edge lines in {path}")
    graph = nx.parse_edgelist(pairs, nodetype=int if numeric else str, data=False)
    return graph, skipped


class SocialGraph:
    """Thin wrapper around ``networkx.Graph`` with cached neighbor lists."""

    def __init__(self, graph: nx.Graph):
        n = graph.number_of_nodes()
        if set(graph.nodes) != set(range(n)):
            raise FormatError("Social graph nodes must be the contiguous ids 0..n-1")
        self.graph = graph
        self._neighbors: Dict[int, List[int]] = {}

    @classmethod
    def from_edges(cls, edges: Iterable[Tuple[int, int]], n_nodes: Optional[int] = None) -> "SocialGraph":
        graph = nx.Graph()
        edges = [(int(u), int(v)) for u, v in edges if u != v]
        highest = max((max(u, v) for u, v in edges), default=-1)
        n = highest + 1 if n_nodes is None else n_nodes
        if highest >= n:
            raise FormatError(f"Edge endpoint {highest} exceeds the {n} declared nodes")
        graph.add_nodes_from(range(n))
        graph.add_edges_from(edges)
        return cls(graph)

    @classmethod
    def from_edge_list(cls, path: str, n_nodes: Optional[int] = None) -> "SocialGraph":
        """Load an edge list of non-negative integer ids; malformed lines are skipped and counted."""
        parsed, _ = read_edge_list(path, numeric=True)
        graph = cls.from_edges(parsed.edges, n_nodes)
        logger.info(f"Loaded social graph with {len(graph)} nodes and {graph.number_of_edges()} edges")
        return graph

    @classmethod
    def random(cls, n: int, p: float, seed: Optional[int] = None) -> "SocialGraph":
        """Erdős-Rényi graph G(n, p)."""
        if n < 1 or not 0 <= p <= 1:
            raise ConfigError(f"Random graph needs n >= 1 and p in [0, 1] (got {n}, {p})")
        return cls(nx.gnp_random_graph(n, p, seed=seed))

    @classmethod
    def parse(cls, source: str, seed: Optional[int] = None, n_nodes: Optional[int] = None) -> "SocialGraph":
        """Edge-list path, or ``random:N:P`` for a random graph."""
        if source.startswith("random:"):
            try:
                _, n, p = source.split(":")
                return cls.random(int(n), float(p), seed)
            except ValueError:
                raise ConfigError(f"Invalid random graph '{source}' (expected random:N:P)") from None
        return cls.from_edge_list(source, n_nodes)

    def __len__(self) -> int:
        return self.graph.number_of_nodes()

    def number_of_edges(self) -> int:
        return self.graph.number_of_edges()

    def neighbors(self, u: int) -> List[int]:
        cached = self._neighbors.get(u)
        if cached is None:
            cached = sorted(self.graph.neighbors(u))
            self._neighbors[u] = cached
        return cached

    def degree(self, u: int) -> int:
        return int(self.graph.degree(u))

    def write_edge_list(self, path: str) -> None:
        with open(path, "w") as handle:
            for u, v in sorted((min(e), max(e)) for e in self.graph.edges):
                handle.write(f"{u} {v}\n")


def graph_summary(graph: Union[SocialGraph, nx.Graph]) -> Dict[str, object]:
    """Size, density, degree statistics and path length of the largest component."""
    g = graph.graph if isinstance(graph, SocialGraph) else graph
    n = g.number_of_nodes()
    degrees = [d for _, d in sorted(g.degree())]
    summary: Dict[str, object] = {
        "nodes": n,
        "edges": g.number_of_edges(),
        "density": nx.density(g) if n > 1 else 0.0,
        "avg_degree": sum(degrees) / n if n else 0.0,
        "avg_shortest_path": 0.0,
        "degree_sequence": degrees,
    }
    if n:
        largest = max(nx.connected_components(g), key=len)
        if len(largest) > 1:
            summary["avg_shortest_path"] = nx.average_shortest_path_length(g.subgraph(largest))
    return summary
