"""seem: hierarchical long-term memory for conversational agents.

Transcripts become a dual-layer store (fused episodic event frames plus a
temporal fact graph); queries run cosine-seeded graph propagation and
reverse provenance expansion, with every model role behind a pluggable
gateway so the full pipeline runs deterministically offline.
"""

from .build import Memory, build
from .errors import SeemError
from .evaluation import QAItem, answer, run_eval
from .gateway import GatewayConfig, HttpGateway, LLMGateway, MockGateway
from .ingest import TranscriptDocument, load_dataset, load_transcript
from .model import Passage, Provenance, RetrievalConfig
from .retrieval import Retriever, SynthesizedContext, Toggles

__all__ = [
    "GatewayConfig",
    "HttpGateway",
    "LLMGateway",
    "Memory",
    "MockGateway",
    "Passage",
    "Provenance",
    "QAItem",
    "Retriever",
    "RetrievalConfig",
    "SeemError",
    "SynthesizedContext",
    "Toggles",
    "TranscriptDocument",
    "answer",
    "build",
    "load_dataset",
    "load_transcript",
    "run_eval",
]

__version__ = "0.1.0"
