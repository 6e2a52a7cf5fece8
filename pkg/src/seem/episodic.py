"""Episodic memory layer: frame extraction, judge-gated fusion, passage index.

Ingestion is order-dependent by design (the fusion chain follows transcript
chronology), so writes are serialized by the caller; reads see a consistent
snapshot. A fused frame replaces both parents under the older frame id and
the newer id is tombstoned, keeping ids stable for the passage index and
snapshots.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ExtractionFailure, FusionFailure, JudgeFailure, NotFound
from .gateway.base import LLMGateway
from .model import (
    EpisodicEventFrame,
    Passage,
    PassageStore,
    Provenance,
    as_unit_vector,
    union_provenance,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConsolidationStats:
    """Histogram of provenance size -> frame count, plus totals and ratio."""

    histogram: dict[int, int]
    total_frames: int
    total_passages: int
    quarantined: int
    ratio: float | None

    def to_dict(self) -> dict:
        return {
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "total_frames": self.total_frames,
            "total_passages": self.total_passages,
            "quarantined": self.quarantined,
            "ratio": self.ratio,
        }


class EpisodicStore:
    """Frames keyed by id, the passage->frames index, and an exact cosine scan."""

    def __init__(self, gateway: LLMGateway, passages: PassageStore,
                 candidate_count: int = 1, candidate_threshold: float = 0.0):
        self.gateway = gateway
        self.passages = passages
        self.candidate_count = candidate_count
        self.candidate_threshold = candidate_threshold
        self.frames: dict[str, EpisodicEventFrame] = {}
        self.passage_index: dict[str, set[str]] = {}
        self.quarantined: set[str] = set()
        self.tombstones: list[str] = []
        self.next_frame_id = 0
        self.dim = gateway.embedding_dim
        self._matrix: np.ndarray | None = None
        self._matrix_order: list[str] = []

    def __len__(self) -> int:
        return len(self.frames)

    # -- ingestion -----------------------------------------------------------

    def ingest_passage(self, passage: Passage) -> str | None:
        """Extract, fuse when judged same-event, and index one passage.

        Returns the id of the frame now covering the passage, or None when
        extraction failed and the passage was quarantined.
        """
        pid = passage.passage_id
        if pid not in self.passages:
            raise NotFound(f"passage {pid!r} is not stored")
        if pid in self.passage_index or pid in self.quarantined:
            raise ValueError(f"passage {pid!r} already ingested")

        try:
            extraction = self.gateway.extract_frame(passage)
        except ExtractionFailure as exc:
            logger.warning("extraction failed for %s: %s", pid, exc)
            self.quarantined.add(pid)
            return None

        candidate = self._new_frame(extraction.summary, extraction.events, Provenance.of(pid))
        previous = self._find_fusion_target(candidate)
        if previous is None:
            self._insert(candidate)
            return candidate.frame_id
        return self._fuse_into(previous, candidate, passage)

    def _new_frame(self, summary: str, events, provenance: Provenance) -> EpisodicEventFrame:
        frame_id = str(self.next_frame_id)
        self.next_frame_id += 1
        embedding = self._embed(summary)
        return EpisodicEventFrame(
            frame_id=frame_id,
            summary=summary,
            events=tuple(events),
            provenance=provenance,
            summary_embedding=embedding,
            created_seq=int(frame_id),
        )

    def _embed(self, text: str) -> np.ndarray:
        vec = self.gateway.embed(text)
        if vec.shape != (self.dim,):
            raise DimensionError(f"gateway returned dim {vec.shape}, store expects {self.dim}")
        return vec

    def _find_fusion_target(self, candidate: EpisodicEventFrame) -> EpisodicEventFrame | None:
        for frame_id, score in self.nearest_frames(candidate.summary_embedding,
                                                   self.candidate_count):
            if score < self.candidate_threshold:
                break  # candidates come in descending score order
            previous = self.frames[frame_id]
            try:
                if self.gateway.judge_same_event(candidate, previous):
                    return previous
            except JudgeFailure as exc:
                logger.warning("judge failed for %s vs %s: %s; treating as distinct",
                               candidate.frame_id, frame_id, exc)
        return None

    def _fuse_into(self, previous: EpisodicEventFrame, candidate: EpisodicEventFrame,
                   passage: Passage) -> str:
        merged_provenance = union_provenance(previous.provenance, candidate.provenance,
                                             self.passages)
        sources = [self.passages.get(pid)
                   for pid in self.passages.chronological(merged_provenance.passage_ids)]
        try:
            fused = self.gateway.fuse_frames(candidate, previous, sources)
        except FusionFailure as exc:
            logger.warning("fusion failed for %s + %s: %s; keeping both frames",
                           previous.frame_id, candidate.frame_id, exc)
            self._insert(candidate)
            return candidate.frame_id

        replacement = EpisodicEventFrame(
            frame_id=previous.frame_id,
            summary=fused.summary,
            events=fused.events,
            provenance=merged_provenance,
            summary_embedding=self._embed(fused.summary),
            created_seq=previous.created_seq,
        )
        self.tombstones.append(candidate.frame_id)
        self._replace(replacement)
        return replacement.frame_id

    def _insert(self, frame: EpisodicEventFrame) -> None:
        self.frames[frame.frame_id] = frame
        for pid in frame.provenance.passage_ids:
            self.passage_index.setdefault(pid, set()).add(frame.frame_id)
        self._matrix = None

    def _replace(self, frame: EpisodicEventFrame) -> None:
        old = self.frames[frame.frame_id]
        for pid in old.provenance.passage_ids:
            self.passage_index[pid].discard(frame.frame_id)
        self.frames[frame.frame_id] = frame
        for pid in frame.provenance.passage_ids:
            self.passage_index.setdefault(pid, set()).add(frame.frame_id)
        self._matrix = None

    # -- reads ----------------------------------------------------------------

    def nearest_frame(self, vector: np.ndarray) -> tuple[str, float] | None:
        """Argmax frame by cosine; ties broken by lowest created_seq; None when empty."""
        top = self.nearest_frames(vector, 1)
        return top[0] if top else None

    def nearest_frames(self, vector: np.ndarray, k: int) -> list[tuple[str, float]]:
        if not self.frames:
            return []
        vector = as_unit_vector(vector, "query vector")
        if vector.shape != (self.dim,):
            raise DimensionError(f"query dim {vector.shape[0]} != store dim {self.dim}")
        matrix, order = self._embedding_matrix()
        scores = matrix @ vector
        ranked = sorted(range(len(order)), key=lambda i: (-scores[i], self.frames[order[i]].created_seq))
        return [(order[i], float(scores[i])) for i in ranked[:k]]

    def _embedding_matrix(self) -> tuple[np.ndarray, list[str]]:
        if self._matrix is None:
            self._matrix_order = sorted(self.frames, key=lambda fid: self.frames[fid].created_seq)
            self._matrix = np.stack(
                [self.frames[fid].summary_embedding for fid in self._matrix_order]
            ) if self._matrix_order else np.zeros((0, self.dim))
        return self._matrix, self._matrix_order

    def frames_for_passage(self, passage_id: str) -> set[EpisodicEventFrame]:
        if passage_id not in self.passages:
            raise NotFound(f"unknown passage {passage_id!r}")
        if passage_id in self.quarantined:
            return set()
        if passage_id not in self.passage_index:
            raise NotFound(f"passage {passage_id!r} has not been ingested")
        return {self.frames[fid] for fid in self.passage_index[passage_id]}

    def is_quarantined(self, passage_id: str) -> bool:
        return passage_id in self.quarantined

    def ingested_passages(self) -> set[str]:
        return set(self.passage_index) | set(self.quarantined)

    def consolidation_stats(self) -> ConsolidationStats:
        histogram: dict[int, int] = {}
        covered = 0
        for frame in self.frames.values():
            size = len(frame.provenance)
            histogram[size] = histogram.get(size, 0) + 1
            covered += size
        total_frames = len(self.frames)
        ratio = covered / total_frames if total_frames else None
        return ConsolidationStats(
            histogram=histogram,
            total_frames=total_frames,
            total_passages=covered,
            quarantined=len(self.quarantined),
            ratio=ratio,
        )

    def audit(self) -> None:
        """Full-store bidirectionality and closure check; raises on violation."""
        for frame_id, frame in self.frames.items():
            for pid in frame.provenance.passage_ids:
                if pid not in self.passages:
                    raise AssertionError(f"frame {frame_id} references unknown passage {pid}")
                if frame_id not in self.passage_index.get(pid, set()):
                    raise AssertionError(f"index missing {pid} -> {frame_id}")
        for pid, frame_ids in self.passage_index.items():
            for frame_id in frame_ids:
                frame = self.frames.get(frame_id)
                if frame is None:
                    raise AssertionError(f"index points at dead frame {frame_id}")
                if pid not in frame.provenance:
                    raise AssertionError(f"index {pid} -> {frame_id} not in provenance")
        overlap = set(self.passage_index) & self.quarantined
        if overlap:
            raise AssertionError(f"passages both indexed and quarantined: {overlap}")
