"""
Daily county-proximity spread network and its scalar features.

A county is a node on a day when it reports at least ``gamma`` cases and has a centroid; two nodes are
joined when both report at least ``lambda_`` cases and their centroids are less than ``delta`` miles apart.
"""

from dataclasses import dataclass
from datetime import date
from functools import partial
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from .ingest import CountyGeo
from .logger import RunLogger
from .utils.data_objects import write_table
from .utils.graph_ops import Graph
from .utils.parallel import parallel_map

EARTH_RADIUS_MILES = 3958.7613

NODE_COLUMNS = ("fips", "new_cases")
EDGE_COLUMNS = ("fips_i", "fips_j")


class NetworkError(ValueError):
    """Invalid graph, thresholds or graph dump."""


@dataclass(frozen=True)
class SpreadGraph:
    """
    The spread network of one day.

    - ``nodes``: ``(fips, cases)`` pairs sorted by fips
    - ``edges``: node index pairs ``(i, j)`` with ``i < j``, sorted
    - ``missing_geo``: counties that passed the case threshold but had no centroid
    """

    date: Optional[date]
    nodes: Tuple[Tuple[str, int], ...]
    edges: Tuple[Tuple[int, int], ...]
    missing_geo: int = 0

    def __post_init__(self):
        """Check the simple-graph invariants."""
        fips = [f for f, _ in self.nodes]
        if fips != sorted(set(fips)):
            raise NetworkError("Nodes must be sorted by fips without duplicates.")
        n = len(self.nodes)
        for i, j in self.edges:
            if not 0 <= i < j < n:
                raise NetworkError(f"Edge ({i}, {j}) is not an ordered pair of node indices.")
        if len(set(self.edges)) != len(self.edges):
            raise NetworkError("Duplicated edge.")

    @property
    def n_nodes(self) -> int:
        """Number of counties in the graph."""
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return len(self.edges)

    @property
    def fips(self) -> List[str]:
        """County identifiers in node order."""
        return [f for f, _ in self.nodes]

    def to_graph(self) -> Graph:
        """Adjacency-table view used by the motif census."""
        return Graph.from_edge_list(len(self.nodes), self.edges)

    def to_networkx(self) -> nx.Graph:
        """The graph with fips-labelled nodes."""
        graph = nx.Graph()
        graph.add_nodes_from(f for f, _ in self.nodes)
        graph.add_edges_from((self.nodes[i][0], self.nodes[j][0]) for i, j in self.edges)
        return graph


@dataclass(frozen=True)
class NetworkFeatures:
    """Node count, edge count and largest-component size of one day's graph."""

    date: Optional[date]
    V: int
    E: int
    GC: int


def _haversine(lat1, lon1, lat2, lon2):
    """Vectorized great-circle distance in miles; arguments in degrees."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(a, dtype=float)) for a in (lat1, lon1, lat2, lon2))
    h = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_MILES * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def haversine_miles(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    """Great-circle distance in miles between two ``(latitude, longitude)`` points given in degrees."""
    for lat, lon in (a, b):
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise NetworkError(f"Coordinate ({lat}, {lon}) is out of range.")
    return float(_haversine(a[0], a[1], b[0], b[1]))


def _geo_lookup(geo: Union[Iterable[CountyGeo], Mapping[str, CountyGeo]]) -> Dict[str, CountyGeo]:
    if isinstance(geo, Mapping):
        return dict(geo)
    return {g.fips: g for g in geo}


def _close_pairs(latitudes: np.ndarray, longitudes: np.ndarray, delta: float) -> List[Tuple[int, int]]:
    """
    All index pairs closer than ``delta`` miles.

    Points are bucketed by latitude: a pair whose latitudes differ by ``delta / R`` radians or more is
    at least ``delta`` miles apart, so only the band above each point is compared.
    """
    order = np.argsort(latitudes, kind="mergesort")
    lat_sorted = latitudes[order]
    lon_sorted = longitudes[order]
    band = np.degrees(delta / EARTH_RADIUS_MILES)
    upper = np.searchsorted(lat_sorted, lat_sorted + band, side="right")
    pairs = []
    for position in range(len(order)):
        stop = upper[position]
        if stop <= position + 1:
            continue
        distances = _haversine(
            lat_sorted[position], lon_sorted[position], lat_sorted[position + 1 : stop], lon_sorted[position + 1 : stop]
        )
        for offset in np.flatnonzero(distances < delta):
            i, j = int(order[position]), int(order[position + 1 + offset])
            pairs.append((min(i, j), max(i, j)))
    return sorted(pairs)


def build_spread_graph(
    day_new_cases: Mapping[str, int],
    geo: Union[Iterable[CountyGeo], Mapping[str, CountyGeo]],
    gamma: int = 5,
    lambda_: int = 5,
    delta: float = 100.0,
    day: Optional[date] = None,
    logger: Optional[RunLogger] = None,
) -> SpreadGraph:
    """
    Build one day's spread network.

    Args:
        day_new_cases: fips -> case count of the day (new cases, or cumulative under the cumulative basis)
        geo: county centroids, as a list or a fips-keyed mapping
        gamma: node threshold, a county is a node when its count is ``>= gamma``
        lambda_: edge threshold, both endpoints need a count ``>= lambda_``
        delta: edge radius in miles, endpoints must be strictly closer than ``delta``
        day: date stored on the graph
        logger: receives a data-repair record when counties lack a centroid

    The result does not depend on the order of ``day_new_cases`` or ``geo``: nodes are sorted by fips.
    """
    if gamma < 1 or lambda_ < 1:
        raise NetworkError("gamma and lambda must be positive integers.")
    if not delta > 0:
        raise NetworkError("delta must be a positive distance in miles.")
    lookup = _geo_lookup(geo)

    candidates = sorted(f for f, count in day_new_cases.items() if count >= gamma)
    missing = [f for f in candidates if f not in lookup]
    if missing and logger is not None:
        logger.log_repair("counties_without_centroid", date=day, count=len(missing), fips=missing)
    kept = [f for f in candidates if f in lookup]
    nodes = tuple((f, int(day_new_cases[f])) for f in kept)

    eligible = np.asarray([i for i, (_, count) in enumerate(nodes) if count >= lambda_], dtype=int)
    edges: List[Tuple[int, int]] = []
    if len(eligible) > 1:
        latitudes = np.asarray([lookup[nodes[i][0]].latitude for i in eligible])
        longitudes = np.asarray([lookup[nodes[i][0]].longitude for i in eligible])
        edges = [(int(eligible[a]), int(eligible[b])) for a, b in _close_pairs(latitudes, longitudes, delta)]
    return SpreadGraph(date=day, nodes=nodes, edges=tuple(sorted(edges)), missing_geo=len(missing))


def _build_for_day(
    item: Tuple[date, Mapping[str, int]], geo: Dict[str, CountyGeo], gamma: int, lambda_: int, delta: float
) -> SpreadGraph:
    day, counts = item
    return build_spread_graph(counts, geo, gamma, lambda_, delta, day=day)


def build_daily_graphs(
    case_maps: Mapping[date, Mapping[str, int]],
    geo: Union[Iterable[CountyGeo], Mapping[str, CountyGeo]],
    gamma: int = 5,
    lambda_: int = 5,
    delta: float = 100.0,
    jobs: int = 1,
    logger: Optional[RunLogger] = None,
) -> List[SpreadGraph]:
    """Build the graph of every day in ``case_maps``, in date order; days are independent and may run in parallel."""
    lookup = _geo_lookup(geo)
    items = sorted(((d, dict(counts)) for d, counts in case_maps.items()), key=lambda item: item[0])
    graphs = parallel_map(
        partial(_build_for_day, geo=lookup, gamma=gamma, lambda_=lambda_, delta=delta), items, jobs=jobs
    )
    if logger is not None:
        skipped = {str(g.date): g.missing_geo for g in graphs if g.missing_geo}
        if skipped:
            logger.log_repair("counties_without_centroid", per_day=skipped, total=sum(skipped.values()))
    return graphs


def largest_component(g: SpreadGraph) -> int:
    """Node count of the largest connected component, 0 for an empty graph."""
    if g.n_nodes == 0:
        return 0
    return max(len(component) for component in nx.connected_components(g.to_networkx()))


def network_features(g: SpreadGraph) -> NetworkFeatures:
    """V, E and GC of a graph."""
    return NetworkFeatures(date=g.date, V=g.n_nodes, E=g.n_edges, GC=largest_component(g))


def _dump_name(day: date) -> str:
    return day.isoformat()


def dump_graph(graph: SpreadGraph, directory: Union[str, Path]) -> Tuple[Path, Path]:
    """
    Write ``<date>.nodes`` (``fips,new_cases``) and ``<date>.edges`` (``fips_i,fips_j``) into ``directory``.

    Returns the two paths.
    """
    if graph.date is None:
        raise NetworkError("Only dated graphs can be dumped.")
    directory = Path(directory)
    nodes = pd.DataFrame(list(graph.nodes), columns=list(NODE_COLUMNS))
    edges = pd.DataFrame(
        [(graph.nodes[i][0], graph.nodes[j][0]) for i, j in graph.edges], columns=list(EDGE_COLUMNS)
    )
    stem = _dump_name(graph.date)
    return (
        write_table(nodes, directory / f"{stem}.nodes", float_format=None),
        write_table(edges, directory / f"{stem}.edges", float_format=None),
    )


def load_graph(directory: Union[str, Path], day: date) -> SpreadGraph:
    """Read a graph written by :func:`dump_graph`."""
    directory = Path(directory)
    stem = _dump_name(day)
    node_path, edge_path = directory / f"{stem}.nodes", directory / f"{stem}.edges"
    for path in (node_path, edge_path):
        if not path.exists():
            raise FileNotFoundError(f"Graph dump {path} does not exist.")
    nodes = pd.read_csv(node_path, dtype={"fips": str, "new_cases": np.int64})
    edges = pd.read_csv(edge_path, dtype=str)
    if tuple(nodes.columns) != NODE_COLUMNS or tuple(edges.columns) != EDGE_COLUMNS:
        raise NetworkError(f"Graph dump for {stem} has unexpected headers.")
    nodes = nodes.sort_values("fips", kind="mergesort")
    index = {f: i for i, f in enumerate(nodes["fips"])}
    try:
        pairs = sorted(
            (min(index[a], index[b]), max(index[a], index[b])) for a, b in zip(edges["fips_i"], edges["fips_j"])
        )
    except KeyError as exc:
        raise NetworkError(f"Edge of {stem} refers to unknown county {exc.args[0]}.") from exc
    return SpreadGraph(
        date=day,
        nodes=tuple((f, int(c)) for f, c in zip(nodes["fips"], nodes["new_cases"])),
        edges=tuple(pairs),
    )


def dumped_dates(directory: Union[str, Path]) -> List[date]:
    """Dates of every graph dump in ``directory``, sorted."""
    return sorted(date.fromisoformat(p.stem) for p in Path(directory).glob("*.nodes"))


def feature_table(features: Sequence[NetworkFeatures]) -> pd.DataFrame:
    """Features as a ``date,V,E,GC`` table."""
    return pd.DataFrame(
        [(f.date.isoformat() if f.date else "", f.V, f.E, f.GC) for f in features],
        columns=["date", "V", "E", "GC"],
    )
