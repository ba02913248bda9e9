import math
import os
import tempfile
import unittest
from datetime import date
from unittest import TestCase

import numpy as np

from spread_market.ingest import CountyGeo, cases_on, read_county_cases, read_geo_csv
from spread_market.logger import LoggingType, RunLogger
from spread_market.network import (
    EARTH_RADIUS_MILES,
    NetworkError,
    SpreadGraph,
    build_daily_graphs,
    build_spread_graph,
    dump_graph,
    dumped_dates,
    feature_table,
    haversine_miles,
    largest_component,
    load_graph,
    network_features,
)


def random_counties(rng, n):
    lat = rng.uniform(38.0, 42.0, n)
    lon = rng.uniform(-80.0, -74.0, n)
    geo = [CountyGeo(f"{i + 1:05d}", float(a), float(o)) for i, (a, o) in enumerate(zip(lat, lon))]
    cases = {g.fips: int(c) for g, c in zip(geo, rng.integers(0, 20, n))}
    return geo, cases


class TestHaversine(TestCase):
    def test_examples(self):
        self.assertEqual(0.0, haversine_miles((40.0, -75.0), (40.0, -75.0)))
        self.assertAlmostEqual(80.4, haversine_miles((40.7128, -74.0060), (39.9526, -75.1652)), delta=0.5)
        self.assertAlmostEqual(math.pi * EARTH_RADIUS_MILES, haversine_miles((0.0, 0.0), (0.0, 180.0)), places=6)
        self.assertAlmostEqual(12436.8, haversine_miles((10.0, 20.0), (-10.0, -160.0)), delta=0.1)

    def test_symmetric(self):
        a, b = (33.1, -117.2), (47.6, -122.3)
        self.assertEqual(haversine_miles(a, b), haversine_miles(b, a))

    def test_out_of_range(self):
        with self.assertRaises(NetworkError):
            haversine_miles((91.0, 0.0), (0.0, 0.0))


class TestSpreadGraph(TestCase):
    def setUp(self) -> None:
        self.geo = [
            CountyGeo("36001", 40.0, -75.0),
            CountyGeo("36003", 40.1, -75.0),
            CountyGeo("36005", 40.0, -75.1),
            CountyGeo("36007", 42.2, -75.0),
        ]

    def test_triangle(self):
        g = build_spread_graph({"36001": 5, "36003": 5, "36005": 5}, self.geo, 5, 5, 100)
        self.assertEqual((3, 3), (g.n_nodes, g.n_edges))
        self.assertEqual(3, largest_component(g))

    def test_distance_gate(self):
        g = build_spread_graph({"36001": 10, "36007": 10}, self.geo, 5, 5, 100)
        self.assertEqual((2, 0), (g.n_nodes, g.n_edges))
        self.assertEqual(1, largest_component(g))

    def test_thresholds(self):
        g = build_spread_graph({"36001": 4, "36003": 6, "36005": 9}, self.geo, gamma=5, lambda_=7, delta=100)
        self.assertListEqual(["36003", "36005"], g.fips)
        self.assertEqual(0, g.n_edges)
        with self.assertRaises(NetworkError):
            build_spread_graph({}, self.geo, gamma=0)
        with self.assertRaises(NetworkError):
            build_spread_graph({}, self.geo, delta=0.0)

    def test_missing_geo(self):
        logger = RunLogger()
        g = build_spread_graph({"36001": 5, "99999": 50}, self.geo, day=date(2020, 4, 1), logger=logger)
        self.assertEqual(1, g.n_nodes)
        self.assertEqual(1, g.missing_geo)
        self.assertEqual(1, len(logger.filter_log("WARNING", logging_type=LoggingType.DATA_REPAIR)))

    def test_invariants(self):
        with self.assertRaises(NetworkError):
            SpreadGraph(None, (("36003", 5), ("36001", 5)), ())
        with self.assertRaises(NetworkError):
            SpreadGraph(None, (("36001", 5), ("36003", 5)), ((1, 0),))
        with self.assertRaises(NetworkError):
            SpreadGraph(None, (("36001", 5), ("36003", 5)), ((0, 1), (0, 1)))

    def test_order_independent(self):
        rng = np.random.default_rng(2)
        geo, cases = random_counties(rng, 60)
        a = build_spread_graph(cases, geo)
        b = build_spread_graph(dict(reversed(list(cases.items()))), list(reversed(geo)))
        self.assertEqual(a.nodes, b.nodes)
        self.assertEqual(a.edges, b.edges)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        geo, cases = random_counties(rng, 80)
        g = build_spread_graph(cases, geo, gamma=3, lambda_=6, delta=75.0)
        lookup = {c.fips: c for c in geo}
        expected = set()
        for i, (fi, ci) in enumerate(g.nodes):
            for j, (fj, cj) in enumerate(g.nodes):
                if i < j and ci >= 6 and cj >= 6:
                    a, b = lookup[fi], lookup[fj]
                    if haversine_miles((a.latitude, a.longitude), (b.latitude, b.longitude)) < 75.0:
                        expected.add((i, j))
        self.assertSetEqual(expected, set(g.edges))
        self.assertTrue(all(c >= 3 for _, c in g.nodes))

    def test_monotone_in_thresholds(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            geo, cases = random_counties(rng, 40)
            small = build_spread_graph(cases, geo, 5, 5, 50.0)
            large = build_spread_graph(cases, geo, 5, 5, 120.0)
            self.assertTrue(set(small.edges) <= set(large.edges))
            strict = build_spread_graph(cases, geo, 5, 10, 120.0)
            self.assertTrue(set(strict.edges) <= set(large.edges))

    def test_features(self):
        g = build_spread_graph({"36001": 5, "36003": 5, "36005": 5, "36007": 5}, self.geo, day=date(2020, 4, 1))
        features = network_features(g)
        self.assertEqual((4, 3, 3), (features.V, features.E, features.GC))
        table = feature_table([features])
        self.assertListEqual(["date", "V", "E", "GC"], list(table.columns))
        self.assertEqual("2020-04-01", table["date"][0])

    def test_largest_component(self):
        self.assertEqual(0, largest_component(SpreadGraph(None, (), ())))
        nodes = tuple((f"{i:05d}", 5) for i in range(12))
        edges = tuple([(i, i + 1) for i in range(6)] + [(7, 8), (8, 9), (9, 10), (10, 11)])
        self.assertEqual(7, largest_component(SpreadGraph(None, nodes, edges)))


class TestDailyGraphs(TestCase):
    def test_build_and_dump(self):
        geo = [CountyGeo("36001", 40.0, -75.0), CountyGeo("36003", 40.1, -75.0), CountyGeo("36005", 40.0, -75.1)]
        maps = {
            date(2020, 4, 2): {"36001": 5, "36003": 7},
            date(2020, 4, 1): {"36001": 6, "36003": 2, "36005": 9},
        }
        graphs = build_daily_graphs(maps, geo)
        self.assertListEqual([date(2020, 4, 1), date(2020, 4, 2)], [g.date for g in graphs])
        self.assertEqual([2, 2], [g.n_nodes for g in graphs])

        with tempfile.TemporaryDirectory() as folder:
            for g in graphs:
                dump_graph(g, folder)
            self.assertListEqual([date(2020, 4, 1), date(2020, 4, 2)], dumped_dates(folder))
            loaded = load_graph(folder, date(2020, 4, 2))
            self.assertEqual(graphs[1].nodes, loaded.nodes)
            self.assertEqual(graphs[1].edges, loaded.edges)
            with self.assertRaises(FileNotFoundError):
                load_graph(folder, date(2020, 4, 3))


@unittest.skipUnless(
    os.getenv("SPREAD_MARKET_NYT_SNAPSHOT") and os.getenv("SPREAD_MARKET_GEO"),
    "needs a county-cases snapshot and a centroid table",
)
class TestSnapshot(TestCase):
    """The 2020-04-11 network of a real county snapshot has about 514 nodes and 3831 edges."""

    def test_april_11(self):
        records = read_county_cases(os.environ["SPREAD_MARKET_NYT_SNAPSHOT"]).records
        geo = read_geo_csv(os.environ["SPREAD_MARKET_GEO"])
        day = date(2020, 4, 11)
        matches = {}
        for basis in ("new", "cumulative"):
            g = build_spread_graph(cases_on(records, day, basis=basis), geo, 5, 5, 100.0, day=day)
            matches[basis] = abs(g.n_nodes - 514) <= 0.05 * 514 and abs(g.n_edges - 3831) <= 0.05 * 3831
        self.assertTrue(any(matches.values()), matches)
