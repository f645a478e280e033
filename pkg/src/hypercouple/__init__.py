"""Glauber dynamics on hypergraph independent sets and colourings: coupling
experiments, mixing-time bound calculators and exact counting oracles."""

from .chains import ChainParams, Kind
from .hypergraph import Hypergraph, parse_hypergraph, serialize, validate

__all__ = ["ChainParams", "Hypergraph", "Kind", "parse_hypergraph", "serialize", "validate"]
__version__ = "0.1.0"
