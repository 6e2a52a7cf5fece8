"""Shared domain types, identity rules, and the provenance discipline.

Identity scheme: passage ids are "{session_id}:{turn_index}"; frame and
entity ids are store-assigned monotone integers rendered as strings, so
rebuilding the same input stream yields byte-identical stores.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigError, DimensionError, NotFound, ProvenanceViolation

UNIT_NORM_TOL = 1e-6


def as_unit_vector(vec: np.ndarray, what: str = "embedding") -> np.ndarray:
    """Validate and return a float64 unit-norm copy of `vec`."""
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{what} must be a 1-d vector, got shape {arr.shape}")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"{what} must be unit-norm (|v|={norm!r})")
    return arr


def passage_id_for(session_id: str, turn_index: int) -> str:
    return f"{session_id}:{turn_index}"


@dataclass(frozen=True)
class Passage:
    """An atomic transcript unit (one speaker turn); the ground truth all memory points back to."""

    passage_id: str
    session_id: str
    turn_index: int
    speaker: str
    text: str
    timestamp: datetime | None = None

    def __post_init__(self) -> None:
        if not self.passage_id:
            raise ValueError("passage_id must be non-empty")
        if self.turn_index < 0:
            raise ValueError("turn_index must be non-negative")
        if not self.text.strip():
            raise ValueError("passage text must be non-empty after trimming")


class PassageStore:
    """Owns passage identity and chronology.

    Chronological order is insertion order: loaders feed passages in
    transcript order and the store assigns a monotone rank used for every
    tie-break that says "chronological".
    """

    def __init__(self) -> None:
        self._by_id: dict[str, Passage] = {}
        self._rank: dict[str, int] = {}
        self._session_turns: set[tuple[str, int]] = set()

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, passage_id: str) -> bool:
        return passage_id in self._by_id

    def __iter__(self) -> Iterator[Passage]:
        return iter(sorted(self._by_id.values(), key=lambda p: self._rank[p.passage_id]))

    def add(self, passage: Passage) -> None:
        if passage.passage_id in self._by_id:
            raise ValueError(f"duplicate passage_id {passage.passage_id!r}")
        key = (passage.session_id, passage.turn_index)
        if key in self._session_turns:
            raise ValueError(f"duplicate (session_id, turn_index) {key!r}")
        self._by_id[passage.passage_id] = passage
        self._rank[passage.passage_id] = len(self._rank)
        self._session_turns.add(key)

    def get(self, passage_id: str) -> Passage:
        try:
            return self._by_id[passage_id]
        except KeyError:
            raise NotFound(f"unknown passage {passage_id!r}") from None

    def rank(self, passage_id: str) -> int:
        try:
            return self._rank[passage_id]
        except KeyError:
            raise NotFound(f"unknown passage {passage_id!r}") from None

    def chronological(self, passage_ids: Iterable[str]) -> list[str]:
        return sorted(set(passage_ids), key=self.rank)

    def ids(self) -> list[str]:
        return [p.passage_id for p in self]


@dataclass(frozen=True)
class Provenance:
    """Non-empty set of source-passage ids grounding a frame or fact."""

    passage_ids: frozenset[str]

    def __post_init__(self) -> None:
        if not self.passage_ids:
            raise ValueError("provenance must reference at least one passage")

    @classmethod
    def of(cls, *passage_ids: str) -> "Provenance":
        return cls(frozenset(passage_ids))

    def union(self, other: "Provenance") -> "Provenance":
        return Provenance(self.passage_ids | other.passage_ids)

    def sorted_ids(self) -> list[str]:
        return sorted(self.passage_ids)

    def __len__(self) -> int:
        return len(self.passage_ids)

    def __contains__(self, passage_id: str) -> bool:
        return passage_id in self.passage_ids


def union_provenance(a: Provenance, b: Provenance, passages: PassageStore) -> Provenance:
    """Set union of two provenance sets, enforcing referential closure."""
    merged = a.union(b)
    dangling = [pid for pid in merged.sorted_ids() if pid not in passages]
    if dangling:
        raise ProvenanceViolation(f"dangling passage ids: {dangling}")
    return merged


@dataclass(frozen=True)
class SemanticRoleEvent:
    """One event with its semantic roles; absent roles are explicit None, never ''."""

    participants: tuple[str, ...] = ()
    actions: tuple[str, ...] = ()
    time: str | None = None
    location: str | None = None
    causality: str | None = None
    manner: str | None = None

    def __post_init__(self) -> None:
        if not self.participants and not self.actions:
            raise ValueError("an event needs at least one participant or action")
        for role in ("time", "location", "causality", "manner"):
            value = getattr(self, role)
            if value is not None and not value.strip():
                raise ValueError(f"absent {role} must be None, not an empty string")


@dataclass(eq=False)
class EpisodicEventFrame:
    """Summary + ordered semantic-role events + provenance + summary embedding."""

    frame_id: str
    summary: str
    events: tuple[SemanticRoleEvent, ...]
    provenance: Provenance
    summary_embedding: np.ndarray
    created_seq: int

    def __post_init__(self) -> None:
        if not self.summary.strip():
            raise ValueError("frame summary must be non-empty")
        if not self.events:
            raise ValueError("frame must carry at least one event")
        self.summary_embedding = as_unit_vector(self.summary_embedding, "summary embedding")


@dataclass(frozen=True)
class TemporalValidity:
    """Temporal validity of a fact: raw text plus a normalized span when resolvable."""

    raw: str
    normalized: str | None = None

    def __post_init__(self) -> None:
        if not self.raw.strip():
            raise ValueError("temporal validity needs raw text")

    @property
    def text(self) -> str:
        return self.normalized if self.normalized is not None else self.raw


@dataclass(frozen=True)
class QuadDraft:
    """A (subject, relation, object, temporal) draft before entity resolution."""

    subject: str
    relation: str
    object: str
    temporal: TemporalValidity | None = None

    def __post_init__(self) -> None:
        if not self.subject.strip():
            raise ValueError("quadruple subject must be non-empty")
        if not self.relation.strip():
            raise ValueError("quadruple relation must be non-empty")

    def serialized(self) -> str:
        tau = self.temporal.text if self.temporal is not None else ""
        return f"{self.subject} | {self.relation} | {self.object} | {tau}"


@dataclass(eq=False)
class Quadruple:
    """A stored fact: surfaces as extracted, resolved entity ids, provenance, embedding."""

    subject: str
    relation: str
    object: str
    subject_id: str
    object_id: str
    temporal: TemporalValidity | None
    provenance: Provenance
    embedding: np.ndarray

    def __post_init__(self) -> None:
        if not self.subject.strip() or not self.relation.strip():
            raise ValueError("fact subject and relation must be non-empty")
        self.embedding = as_unit_vector(self.embedding, "fact embedding")

    def serialized(self) -> str:
        tau = self.temporal.text if self.temporal is not None else ""
        return f"{self.subject} | {self.relation} | {self.object} | {tau}"


@dataclass(eq=False)
class EntityNode:
    """A graph node covering one canonical surface form plus absorbed aliases."""

    entity_id: str
    canonical_name: str
    aliases: set[str]
    embedding: np.ndarray
    linked_passages: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if self.canonical_name not in self.aliases:
            raise ValueError("canonical_name must be one of its own aliases")
        self.embedding = as_unit_vector(self.embedding, "entity embedding")


@dataclass(frozen=True)
class RetrievalConfig:
    """Engine-wide knobs; violations are rejected at construction."""

    initial_retrieval_size: int = 5
    expansion_cap_multiplier: int = 2
    fact_seed_k: int = 5
    damping: float = 0.85
    ppr_tolerance: float = 1e-8
    ppr_max_iters: int = 200
    merge_threshold: float = 0.90
    fusion_candidate_threshold: float = 0.0
    fusion_candidates: int = 1

    def __post_init__(self) -> None:
        if self.initial_retrieval_size < 1:
            raise ConfigError("initial_retrieval_size must be positive")
        if self.expansion_cap_multiplier < 1:
            raise ConfigError("expansion_cap_multiplier must be positive")
        if self.fact_seed_k < 1:
            raise ConfigError("fact_seed_k must be positive")
        if not 0.0 < self.damping < 1.0:
            raise ConfigError("damping must lie in (0, 1)")
        if self.ppr_tolerance <= 0.0:
            raise ConfigError("ppr_tolerance must be positive")
        if self.ppr_max_iters < 1:
            raise ConfigError("ppr_max_iters must be positive")
        if not 0.0 < self.merge_threshold <= 1.0:
            raise ConfigError("merge_threshold must lie in (0, 1]")
        if not 0.0 <= self.fusion_candidate_threshold < 1.0:
            raise ConfigError("fusion_candidate_threshold must lie in [0, 1)")
        if self.fusion_candidates < 1:
            raise ConfigError("fusion_candidates must be positive")

    @property
    def expansion_cap(self) -> int:
        return self.expansion_cap_multiplier * self.initial_retrieval_size

    def to_dict(self) -> dict:
        return {
            "initial_retrieval_size": self.initial_retrieval_size,
            "expansion_cap_multiplier": self.expansion_cap_multiplier,
            "fact_seed_k": self.fact_seed_k,
            "damping": self.damping,
            "ppr_tolerance": self.ppr_tolerance,
            "ppr_max_iters": self.ppr_max_iters,
            "merge_threshold": self.merge_threshold,
            "fusion_candidate_threshold": self.fusion_candidate_threshold,
            "fusion_candidates": self.fusion_candidates,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RetrievalConfig":
        return cls(**data)
