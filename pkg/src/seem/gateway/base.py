"""Gateway boundary: every model-backed capability lives behind this interface.

Six capabilities: frame extraction, quadruple extraction, same-event judging,
frame fusion, answer generation, and text embedding. Implementations must be
safe to share across threads.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..model import Passage, QuadDraft, SemanticRoleEvent

ANSWER_MARKER = "Answer:"


@dataclass(frozen=True)
class ExtractionResult:
    """Validated output of frame extraction or frame fusion."""

    summary: str
    events: tuple[SemanticRoleEvent, ...]

    def __post_init__(self) -> None:
        if not self.summary.strip():
            raise ValueError("extraction summary must be non-empty")
        if not self.events:
            raise ValueError("extraction must yield at least one event")


@dataclass(frozen=True)
class GenerationResult:
    """Answer text plus the raw completion retained for audit."""

    answer: str
    raw: str
    parsed: bool


def parse_answer(raw: str) -> GenerationResult:
    """Extract the text after the final "Answer:" marker.

    A completion without the marker is returned whole, flagged unparsed.
    """
    idx = raw.rfind(ANSWER_MARKER)
    if idx < 0:
        return GenerationResult(answer=raw.strip(), raw=raw, parsed=False)
    return GenerationResult(answer=raw[idx + len(ANSWER_MARKER):].strip(), raw=raw, parsed=True)


def load_prompt(name: str) -> str:
    """Load a versioned prompt resource shipped with the package."""
    return resources.files("seem.gateway").joinpath("prompts", name).read_text(encoding="utf-8")


def render_passage_for_extraction(passage: Passage) -> str:
    """Render one turn the way the extraction prompt expects it.

    Time information travels inside the rendered turn; the stored passage
    text itself is never rewritten.
    """
    when = passage.timestamp.isoformat() if passage.timestamp is not None else "unknown time"
    return f"[{when}] {passage.speaker}: {passage.text}"


class LLMGateway(abc.ABC):
    """Single boundary for every model-backed capability."""

    embedding_dim: int

    @abc.abstractmethod
    def fingerprint(self) -> str:
        """Stable identifier of the backing model configuration, stored in snapshots."""

    @abc.abstractmethod
    def extract_frame(self, passage: Passage) -> ExtractionResult:
        """Parse one passage into a summary plus semantic-role events."""

    @abc.abstractmethod
    def extract_quadruples(self, text: str, reference_time=None) -> list[QuadDraft]:
        """Extract (subject, relation, object, temporal) drafts from free text."""

    @abc.abstractmethod
    def judge_same_event(self, candidate, previous) -> bool:
        """Decide whether two frames describe the same occurrence."""

    @abc.abstractmethod
    def fuse_frames(self, candidate, previous, sources: list[Passage]) -> ExtractionResult:
        """Merge two same-event frames; the caller owns the provenance union."""

    @abc.abstractmethod
    def generate_answer(self, query: str, context) -> GenerationResult:
        """Answer a query over a synthesized context."""

    @abc.abstractmethod
    def embed(self, text: str) -> np.ndarray:
        """Deterministically embed text to a unit-norm vector of embedding_dim."""
