"""
Census of connected induced 3-node and 4-node subgraphs of a spread network.

Class convention (edge-count order):

- T1: path on 3 nodes, T2: triangle
- M1: path P4, M2: star K1,3, M3: cycle C4, M4: paw (triangle with a pendant),
  M5: diamond (K4 minus one edge), M6: clique K4

The default backend counts non-induced copies from degree, common-neighbour and triangle statistics,
finds 4-cliques by ordered enumeration and converts to induced counts by inclusion-exclusion. The
``enumerate`` backend visits every connected 3/4-node subset once (extend-subgraph enumeration).
"""

from dataclasses import asdict, dataclass
from datetime import date
from functools import partial
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse

from .network import SpreadGraph, largest_component
from .utils.graph_ops import Graph
from .utils.parallel import parallel_map

MOTIF_COLUMNS = ("date", "V", "E", "GC", "T1", "T2", "M1", "M2", "M3", "M4", "M5", "M6", "TotM")
CENSUS_METHODS = ("formula", "enumerate")

#: sorted induced degree sequence of a 4-subset -> class
TETRAD_CLASSES = {
    (0, 0, 0, 0): "empty4",
    (0, 0, 1, 1): "edge4",
    (1, 1, 1, 1): "2K2",
    (0, 1, 1, 2): "P3+K1",
    (0, 2, 2, 2): "K3+K1",
    (1, 1, 2, 2): "M1",
    (1, 1, 1, 3): "M2",
    (2, 2, 2, 2): "M3",
    (1, 2, 2, 3): "M4",
    (2, 2, 3, 3): "M5",
    (3, 3, 3, 3): "M6",
}
#: induced edge count of a 3-subset -> class
TRIAD_CLASSES = {0: "empty3", 1: "edge3", 2: "T1", 3: "T2"}


class MotifError(ValueError):
    """Unknown census method."""


@dataclass(frozen=True)
class MotifCensus:
    """Network size and motif counts of one day. ``TotM`` is the sum of M1..M6."""

    date: Optional[date] = None
    V: int = 0
    E: int = 0
    GC: int = 0
    T1: int = 0
    T2: int = 0
    M1: int = 0
    M2: int = 0
    M3: int = 0
    M4: int = 0
    M5: int = 0
    M6: int = 0

    def __post_init__(self):
        """All counts are non-negative."""
        for name, value in asdict(self).items():
            if name != "date" and value < 0:
                raise MotifError(f"Negative count {name}={value}; the census is inconsistent.")

    @property
    def TotM(self) -> int:
        """Total number of connected 4-node subgraphs."""
        return self.M1 + self.M2 + self.M3 + self.M4 + self.M5 + self.M6

    @property
    def tetrads(self) -> Tuple[int, int, int, int, int, int]:
        """``(M1, ..., M6)``."""
        return self.M1, self.M2, self.M3, self.M4, self.M5, self.M6

    def as_row(self) -> Tuple:
        """Values in :data:`MOTIF_COLUMNS` order."""
        return (
            self.date.isoformat() if self.date else "",
            self.V,
            self.E,
            self.GC,
            self.T1,
            self.T2,
            *self.tetrads,
            self.TotM,
        )


def _as_graph(g: Union[SpreadGraph, Graph]) -> Graph:
    return g.to_graph() if isinstance(g, SpreadGraph) else g


def _statistics(graph: Graph):
    """Degrees, edge endpoints, per-edge triangle counts and the common-neighbour matrix."""
    n = len(graph)
    degrees = np.asarray([graph.degree(v) for v in range(n)], dtype=np.int64)
    edges = np.asarray(graph.edge_list(), dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return degrees, edges, np.zeros(0, dtype=np.int64), None
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adjacency = sparse.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(n, n))
    common = (adjacency @ adjacency).tocsr()
    edge_triangles = np.asarray(common[edges[:, 0], edges[:, 1]], dtype=np.int64).ravel()
    return degrees, edges, edge_triangles, common


def census_triads(g: Union[SpreadGraph, Graph]) -> Tuple[int, int]:
    """
    Induced 3-node counts ``(T1, T2)``: open paths and triangles.

    Uses ``T1 = sum_v C(deg(v), 2) - 3 * T2``.
    """
    graph = _as_graph(g)
    degrees, _, edge_triangles, _ = _statistics(graph)
    triangles = int(edge_triangles.sum()) // 3
    wedges = int((degrees * (degrees - 1) // 2).sum())
    return wedges - 3 * triangles, triangles


def count_four_cliques(g: Union[SpreadGraph, Graph]) -> int:
    """Number of K4 subgraphs, each found once from its lowest-ranked vertex."""
    forward = _as_graph(g).forward_adjacency()
    total = 0
    for v, out in enumerate(forward):
        for u in out:
            shared = out & forward[u]
            for w in shared:
                total += len(shared & forward[w])
    return total


def _tetrads_by_formula(graph: Graph) -> Tuple[int, int, int, int, int, int]:
    degrees, edges, edge_triangles, common = _statistics(graph)
    if len(edges) == 0:
        return 0, 0, 0, 0, 0, 0
    triangles = int(edge_triangles.sum()) // 3
    u, v = edges[:, 0], edges[:, 1]

    node_triangles = np.zeros(len(graph), dtype=np.int64)
    np.add.at(node_triangles, u, edge_triangles)
    np.add.at(node_triangles, v, edge_triangles)
    node_triangles //= 2

    off_diagonal = sparse.triu(common, k=1).data.astype(np.int64)
    # non-induced copies of each connected 4-node pattern
    paths = int(((degrees[u] - 1) * (degrees[v] - 1)).sum()) - 3 * triangles
    stars = int((degrees * (degrees - 1) * (degrees - 2) // 6).sum())
    cycles = int((off_diagonal * (off_diagonal - 1) // 2).sum()) // 2
    paws = int((node_triangles * (degrees - 2)).sum())
    diamonds = int((edge_triangles * (edge_triangles - 1) // 2).sum())
    cliques = count_four_cliques(graph)

    m6 = cliques
    m5 = diamonds - 6 * m6
    m3 = cycles - m5 - 3 * m6
    m4 = paws - 4 * m5 - 12 * m6
    m2 = stars - m4 - 2 * m5 - 4 * m6
    m1 = paths - 2 * m4 - 4 * m3 - 6 * m5 - 12 * m6
    return m1, m2, m3, m4, m5, m6


def _classify_connected(graph: Graph, subset: Sequence[int]) -> str:
    degrees = sorted(sum(graph.has_edge(a, b) for b in subset if b != a) for a in subset)
    if len(subset) == 3:
        return TRIAD_CLASSES[sum(degrees) // 2]
    return TETRAD_CLASSES[tuple(degrees)]


def enumerate_census(g: Union[SpreadGraph, Graph]) -> Dict[str, int]:
    """
    Counts of T1, T2 and M1..M6 by visiting every connected 3- and 4-node subset exactly once.

    Each subset is grown from its smallest vertex, extending only with vertices larger than that root
    that are exclusive neighbours of the newest vertex.
    """
    graph = _as_graph(g)
    counts = dict.fromkeys(("T1", "T2", "M1", "M2", "M3", "M4", "M5", "M6"), 0)

    def extend(subset: List[int], extension: List[int], root: int, neighbourhood: set):
        if len(subset) >= 3:
            counts[_classify_connected(graph, subset)] += 1
        if len(subset) == 4:
            return
        extension = list(extension)
        while extension:
            w = extension.pop()
            exclusive = [x for x in graph.neighbours(w) if x > root and x not in neighbourhood]
            extend(subset + [w], extension + exclusive, root, neighbourhood | graph.neighbours(w))

    for v in range(len(graph)):
        extend([v], [u for u in graph.neighbours(v) if u > v], v, {v} | graph.neighbours(v))
    return counts


def census_tetrads(g: Union[SpreadGraph, Graph], method: str = "formula") -> Tuple[int, int, int, int, int, int]:
    """Induced counts ``(M1, ..., M6)`` of the six connected 4-node classes."""
    if method == "formula":
        return _tetrads_by_formula(_as_graph(g))
    if method == "enumerate":
        counts = enumerate_census(g)
        return tuple(counts[f"M{i}"] for i in range(1, 7))  # type: ignore[return-value]
    raise MotifError(f"Unknown census method {method!r}; expected one of {CENSUS_METHODS}.")


def oracle_census(g: Union[SpreadGraph, Graph]) -> Dict[str, int]:
    """
    Exhaustive classification of every 3-subset and every 4-subset, disconnected classes included.

    Slow (``O(n^4)``); used to validate the fast census on small graphs.
    """
    graph = _as_graph(g)
    counts = dict.fromkeys(list(TRIAD_CLASSES.values()) + list(TETRAD_CLASSES.values()), 0)
    for subset in combinations(range(len(graph)), 3):
        counts[TRIAD_CLASSES[sum(graph.has_edge(a, b) for a, b in combinations(subset, 2))]] += 1
    for subset in combinations(range(len(graph)), 4):
        degrees = tuple(sorted(sum(graph.has_edge(a, b) for b in subset if b != a) for a in subset))
        counts[TETRAD_CLASSES[degrees]] += 1
    return counts


def motif_census(g: SpreadGraph, method: str = "formula") -> MotifCensus:
    """Full census row of one day's graph."""
    if method not in CENSUS_METHODS:
        raise MotifError(f"Unknown census method {method!r}; expected one of {CENSUS_METHODS}.")
    graph = g.to_graph()
    if method == "formula":
        t1, t2 = census_triads(graph)
        tetrads = _tetrads_by_formula(graph)
    else:
        counts = enumerate_census(graph)
        t1, t2 = counts["T1"], counts["T2"]
        tetrads = tuple(counts[f"M{i}"] for i in range(1, 7))
    m1, m2, m3, m4, m5, m6 = tetrads
    return MotifCensus(
        date=g.date,
        V=g.n_nodes,
        E=g.n_edges,
        GC=largest_component(g),
        T1=t1,
        T2=t2,
        M1=m1,
        M2=m2,
        M3=m3,
        M4=m4,
        M5=m5,
        M6=m6,
    )


def census_series(graphs: Sequence[SpreadGraph], method: str = "formula", jobs: int = 1) -> List[MotifCensus]:
    """One census row per graph, in input order (graphs are expected date-sorted)."""
    dates = [g.date for g in graphs]
    if any(d is None for d in dates) or dates != sorted(dates):
        raise MotifError("census_series needs dated graphs in increasing date order.")
    return parallel_map(partial(motif_census, method=method), graphs, jobs=jobs)


def census_table(rows: Sequence[MotifCensus]) -> pd.DataFrame:
    """Census rows as a table with :data:`MOTIF_COLUMNS`."""
    return pd.DataFrame([row.as_row() for row in rows], columns=list(MOTIF_COLUMNS))


def read_census_table(frame: pd.DataFrame) -> List[MotifCensus]:
    """Inverse of :func:`census_table`; ``TotM`` is recomputed and checked."""
    rows = []
    for record in frame.to_dict("records"):
        total = int(record.pop("TotM"))
        day = date.fromisoformat(str(record.pop("date")))
        row = MotifCensus(date=day, **{k: int(v) for k, v in record.items()})
        if row.TotM != total:
            raise MotifError(f"TotM of {day} does not equal M1 + ... + M6.")
        rows.append(row)
    return rows
