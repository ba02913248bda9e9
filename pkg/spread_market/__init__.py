"""Coronavirus spread networks and the stock market: network motifs, causality, forecasts and volatility."""

__version__ = "0.1.0"

from .config import RunConfig, load_config
from .logger import RunLogger
from .motifs import MotifCensus, motif_census
from .network import SpreadGraph, build_spread_graph
from .timeseries import DailySeries, SeriesBundle
