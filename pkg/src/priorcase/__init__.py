"""Hybrid prior-case retrieval engine.

Role-filtered queries, dense candidate retrieval (flat / IVF-FLAT),
candidate-restricted BM25, reciprocal rank fusion, chunked pair-scorer
re-ranking, and a MAP/MRR/P@k evaluation harness.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    PriorcaseError,
    ScorerTransportError,
    SidecarRequestError,
    StageError,
    ValidationError,
)
