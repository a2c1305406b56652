"""Temporal context integration for signed link-sign prediction."""

from .errors import TemporalSignedError
from .graph import SignedEdge, SnapshotGraph, TemporalSignedGraph, build_snapshot

__version__ = "0.1.0"

__all__ = ["SignedEdge", "SnapshotGraph", "TemporalSignedError", "TemporalSignedGraph",
           "build_snapshot", "__version__"]
