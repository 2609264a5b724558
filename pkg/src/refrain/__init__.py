"""Attribution-first generative music service components.

The pipeline: users pick reference songs from a consent-governed catalogue
(directly, or via prompt retrieval), every request is verified against one
consent snapshot, outputs are composed so their provenance is exact by
construction, and a hash-chained ledger turns manifests into auditable,
tiered payouts.
"""

from .blocks import DEFAULT_VOCABULARY, BlockSpec, BlockVocabulary, FeatureTrack
from .catalogue import Catalogue, HierarchyNode, IngestReport, Song
from .consent import (
    CheckResult,
    ConsentRegistry,
    ConsentSnapshot,
    IntendedUse,
    UsageKind,
)
from .errors import (
    ConfigurationError,
    ConservationError,
    InvalidRequestError,
    NotFoundError,
    RefrainError,
)
from .generation import (
    BlockAssignment,
    Contributor,
    GenerationEngine,
    GenerationOutput,
    ProvenanceManifest,
    contribution_weights,
)
from .ledger import (
    Allocation,
    CompensationStatement,
    Ledger,
    LedgerEntry,
    Tariff,
    allocate,
    compute_fee,
    largest_remainder,
)
from .retrieval import HashedTagEncoder, Prompt, PromptKind, RetrievalEngine, RetrievalSession
from .verification import (
    GenerationRequest,
    ReferenceSelection,
    SelectionLevel,
    UnspecifiedPolicy,
    VerificationOutcome,
    recommend_alternatives,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "BlockAssignment",
    "BlockSpec",
    "BlockVocabulary",
    "Catalogue",
    "CheckResult",
    "CompensationStatement",
    "ConfigurationError",
    "ConsentRegistry",
    "ConsentSnapshot",
    "ConservationError",
    "Contributor",
    "DEFAULT_VOCABULARY",
    "FeatureTrack",
    "GenerationEngine",
    "GenerationOutput",
    "GenerationRequest",
    "HashedTagEncoder",
    "HierarchyNode",
    "IngestReport",
    "IntendedUse",
    "InvalidRequestError",
    "Ledger",
    "LedgerEntry",
    "NotFoundError",
    "Prompt",
    "PromptKind",
    "ProvenanceManifest",
    "RefrainError",
    "ReferenceSelection",
    "RetrievalEngine",
    "RetrievalSession",
    "SelectionLevel",
    "Song",
    "Tariff",
    "UnspecifiedPolicy",
    "UsageKind",
    "VerificationOutcome",
    "allocate",
    "compute_fee",
    "contribution_weights",
    "largest_remainder",
    "recommend_alternatives",
    "verify",
]
