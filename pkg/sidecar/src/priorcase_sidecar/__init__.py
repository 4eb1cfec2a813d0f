"""Model sidecar for the priorcase retrieval engine."""

__version__ = "0.1.0"
