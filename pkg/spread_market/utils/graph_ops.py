"""This file contains a custom undirected graph class used by the motif census kernels."""

from typing import Dict, Iterable, List, Sequence, Set, Tuple


class Graph:
    """Use adjacent table to store a simple undirected graph."""

    def __init__(self, vertices: Sequence, edges: Dict[int, Iterable[int]]):
        """Note that the all the keys and values are the index of vertices."""
        if len(vertices) != len(edges):
            raise ValueError(
                "The edges (adjacent table) should be the same length as the vertices."
            )
        if len(vertices) != len(set(vertices)):
            raise ValueError("Duplicated value in vertices.")
        self.vertices = list(vertices)
        self.adjacency: List[Set[int]] = [set(edges[i]) for i in range(len(self.vertices))]
        for v, neighbours in enumerate(self.adjacency):
            if v in neighbours:
                raise ValueError(f"Self-loop on vertex {self.vertices[v]!r}.")
            for u in neighbours:
                if not 0 <= u < len(self.vertices):
                    raise ValueError(f"Vertex index {u} out of range.")
                if v not in self.adjacency[u]:
                    raise ValueError(
                        f"Adjacent table is not symmetric: {v} -> {u} has no reverse edge."
                    )

    @classmethod
    def from_edge_list(cls, n: int, edge_list: Iterable[Tuple[int, int]]) -> "Graph":
        """Build a graph on vertices ``0..n-1`` from index pairs; duplicated pairs are merged."""
        edges: Dict[int, Set[int]] = {i: set() for i in range(n)}
        for u, v in edge_list:
            if u == v:
                raise ValueError(f"Self-loop on vertex {u}.")
            edges[u].add(v)
            edges[v].add(u)
        return cls(list(range(n)), edges)

    def __len__(self) -> int:
        """Number of vertices."""
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return sum(len(neighbours) for neighbours in self.adjacency) // 2

    def degree(self, v: int) -> int:
        """Degree of vertex index ``v``."""
        return len(self.adjacency[v])

    def has_edge(self, u: int, v: int) -> bool:
        """Whether ``u`` and ``v`` are adjacent."""
        return v in self.adjacency[u]

    def neighbours(self, v: int) -> Set[int]:
        """Neighbour indices of ``v``."""
        return self.adjacency[v]

    def edge_list(self) -> List[Tuple[int, int]]:
        """Sorted list of ``(u, v)`` with ``u < v``."""
        return sorted((u, v) for u, neighbours in enumerate(self.adjacency) for v in neighbours if u < v)

    def degree_order(self) -> List[int]:
        """Rank of every vertex when sorted by (degree, index)."""
        order = sorted(range(len(self.vertices)), key=lambda v: (len(self.adjacency[v]), v))
        rank = [0] * len(order)
        for position, v in enumerate(order):
            rank[v] = position
        return rank

    def forward_adjacency(self) -> List[Set[int]]:
        """
        Orient every edge from lower to higher degree rank.

        Each triangle (and each 4-clique) then has exactly one vertex from which all the others are
        forward neighbours, so enumerating from that vertex counts it once.
        """
        rank = self.degree_order()
        return [{u for u in neighbours if rank[u] > rank[v]} for v, neighbours in enumerate(self.adjacency)]
