"""Memory container, batch/incremental construction, snapshot persistence.

A snapshot is one self-describing JSON document with canonical key ordering
and base64-embedded float64 vectors, so identical store states serialize to
identical bytes and load(save(S)) round-trips exactly. Snapshots carry an
ingest cursor; incremental builds persist after every segment and a resumed
build continues from the cursor, yielding the same final bytes as an
uninterrupted run.
"""

from __future__ import annotations

import base64
import json
import logging
from pathlib import Path

import numpy as np

from .episodic import EpisodicStore
from .errors import BuildAborted, LoadError
from .gateway.base import LLMGateway
from .graph import GraphStore, SynonymyEdge
from .ingest import TranscriptDocument
from .model import (
    EntityNode,
    EpisodicEventFrame,
    Passage,
    PassageStore,
    Provenance,
    Quadruple,
    RetrievalConfig,
    SemanticRoleEvent,
    TemporalValidity,
)
from .retrieval import Retriever
from .times import parse_instant

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1
DEFAULT_SEGMENTS = 4
DEFAULT_QUARANTINE_TOLERANCE = 0.05


def _encode_vector(vec: np.ndarray) -> str:
    return base64.b64encode(np.asarray(vec, dtype="<f8").tobytes()).decode("ascii")


def _decode_vector(text: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text.encode("ascii")), dtype="<f8").copy()


class Memory:
    """Both memory layers plus their shared passage store and configuration."""

    def __init__(self, gateway: LLMGateway, config: RetrievalConfig | None = None,
                 conversation_id: str = "memory"):
        self.gateway = gateway
        self.config = config or RetrievalConfig()
        self.conversation_id = conversation_id
        self.passages = PassageStore()
        self.episodic = EpisodicStore(
            gateway, self.passages,
            candidate_count=self.config.fusion_candidates,
            candidate_threshold=self.config.fusion_candidate_threshold,
        )
        self.graph = GraphStore(gateway, self.passages,
                                merge_threshold=self.config.merge_threshold)
        self.ingest_cursor = 0

    def ingest_passage(self, passage: Passage) -> None:
        """Store one passage and push it through both layers, in order."""
        self.passages.add(passage)
        self.episodic.ingest_passage(passage)
        self.graph.ingest_passage(passage)
        self.ingest_cursor += 1

    def retriever(self) -> Retriever:
        return Retriever(self.passages, self.episodic, self.graph, self.gateway, self.config)

    def audit(self) -> None:
        """Cross-layer provenance closure; raises on the first violation."""
        self.episodic.audit()
        self.graph.audit()
        covered: set[str] = set()
        for frame in self.episodic.frames.values():
            covered |= frame.provenance.passage_ids
        expected = set(self.episodic.passage_index)
        if covered != expected:
            raise AssertionError(
                f"frame provenance covers {len(covered)} passages, expected {len(expected)}")

    # -- serialization -----------------------------------------------------------

    def to_snapshot_dict(self) -> dict:
        frames = sorted(self.episodic.frames.values(), key=lambda f: f.created_seq)
        entities = sorted(self.graph.entities.values(), key=lambda e: int(e.entity_id))
        return {
            "format_version": SNAPSHOT_VERSION,
            "conversation_id": self.conversation_id,
            "config": self.config.to_dict(),
            "gateway_fingerprint": self.gateway.fingerprint(),
            "embedding_dim": self.gateway.embedding_dim,
            "ingest_cursor": self.ingest_cursor,
            "passages": [
                {
                    "passage_id": p.passage_id,
                    "session_id": p.session_id,
                    "turn_index": p.turn_index,
                    "speaker": p.speaker,
                    "text": p.text,
                    "timestamp": p.timestamp.isoformat() if p.timestamp else None,
                }
                for p in self.passages
            ],
            "episodic": {
                "next_frame_id": self.episodic.next_frame_id,
                "tombstones": list(self.episodic.tombstones),
                "quarantined": sorted(self.episodic.quarantined),
                "frames": [
                    {
                        "frame_id": f.frame_id,
                        "summary": f.summary,
                        "events": [
                            {
                                "participants": list(e.participants),
                                "actions": list(e.actions),
                                "time": e.time,
                                "location": e.location,
                                "causality": e.causality,
                                "manner": e.manner,
                            }
                            for e in f.events
                        ],
                        "provenance": f.provenance.sorted_ids(),
                        "created_seq": f.created_seq,
                        "embedding": _encode_vector(f.summary_embedding),
                    }
                    for f in frames
                ],
            },
            "graph": {
                "next_entity_id": self.graph.next_entity_id,
                "fact_empty": sorted(self.graph.fact_empty),
                "entities": [
                    {
                        "entity_id": e.entity_id,
                        "canonical_name": e.canonical_name,
                        "aliases": sorted(e.aliases),
                        "linked_passages": sorted(e.linked_passages),
                        "embedding": _encode_vector(e.embedding),
                    }
                    for e in entities
                ],
                "absorbed": [
                    {"shadow_id": shadow, "surface": surface, "owner_id": owner}
                    for shadow, (surface, owner) in sorted(
                        self.graph.absorbed.items(), key=lambda kv: int(kv[0]))
                ],
                "synonymy_edges": [
                    {"a": edge.a, "b": edge.b, "similarity": edge.similarity}
                    for edge in self.graph.synonymy_edges
                ],
                "facts": [
                    {
                        "subject": f.subject,
                        "relation": f.relation,
                        "object": f.object,
                        "subject_id": f.subject_id,
                        "object_id": f.object_id,
                        "temporal": None if f.temporal is None else
                        {"raw": f.temporal.raw, "normalized": f.temporal.normalized},
                        "provenance": f.provenance.sorted_ids(),
                        "embedding": _encode_vector(f.embedding),
                    }
                    for f in self.graph.facts
                ],
            },
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(snapshot_text(self.to_snapshot_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, gateway: LLMGateway) -> "Memory":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise LoadError(f"cannot read snapshot {path}: {exc}") from None
        if not isinstance(data, dict) or data.get("format_version") != SNAPSHOT_VERSION:
            raise LoadError(
                f"snapshot version {data.get('format_version')!r} is not "
                f"{SNAPSHOT_VERSION}; refusing to load")
        if data.get("embedding_dim") != gateway.embedding_dim:
            raise LoadError(
                f"snapshot embedding dim {data.get('embedding_dim')} does not match "
                f"the gateway's {gateway.embedding_dim}")
        if data.get("gateway_fingerprint") != gateway.fingerprint():
            logger.warning("snapshot was built by %s but querying with %s",
                           data.get("gateway_fingerprint"), gateway.fingerprint())

        memory = cls(gateway, RetrievalConfig.from_dict(data["config"]),
                     conversation_id=data.get("conversation_id", "memory"))
        for raw in data["passages"]:
            memory.passages.add(Passage(
                passage_id=raw["passage_id"],
                session_id=raw["session_id"],
                turn_index=raw["turn_index"],
                speaker=raw["speaker"],
                text=raw["text"],
                timestamp=parse_instant(raw["timestamp"]),
            ))

        episodic = memory.episodic
        episodic.next_frame_id = data["episodic"]["next_frame_id"]
        episodic.tombstones = list(data["episodic"]["tombstones"])
        episodic.quarantined = set(data["episodic"]["quarantined"])
        for raw in data["episodic"]["frames"]:
            frame = EpisodicEventFrame(
                frame_id=raw["frame_id"],
                summary=raw["summary"],
                events=tuple(
                    SemanticRoleEvent(
                        participants=tuple(e["participants"]),
                        actions=tuple(e["actions"]),
                        time=e["time"],
                        location=e["location"],
                        causality=e["causality"],
                        manner=e["manner"],
                    )
                    for e in raw["events"]
                ),
                provenance=Provenance(frozenset(raw["provenance"])),
                summary_embedding=_decode_vector(raw["embedding"]),
                created_seq=raw["created_seq"],
            )
            episodic.frames[frame.frame_id] = frame
            for pid in frame.provenance.passage_ids:
                episodic.passage_index.setdefault(pid, set()).add(frame.frame_id)

        graph = memory.graph
        graph.next_entity_id = data["graph"]["next_entity_id"]
        graph.fact_empty = set(data["graph"]["fact_empty"])
        for raw in data["graph"]["entities"]:
            node = EntityNode(
                entity_id=raw["entity_id"],
                canonical_name=raw["canonical_name"],
                aliases=set(raw["aliases"]),
                embedding=_decode_vector(raw["embedding"]),
                linked_passages=set(raw["linked_passages"]),
            )
            graph.entities[node.entity_id] = node
        for raw in data["graph"]["absorbed"]:
            graph.absorbed[raw["shadow_id"]] = (raw["surface"], raw["owner_id"])
        for raw in data["graph"]["synonymy_edges"]:
            graph.synonymy_edges.append(SynonymyEdge(raw["a"], raw["b"], raw["similarity"]))
        for raw in data["graph"]["facts"]:
            temporal = raw["temporal"]
            fact = Quadruple(
                subject=raw["subject"],
                relation=raw["relation"],
                object=raw["object"],
                subject_id=raw["subject_id"],
                object_id=raw["object_id"],
                temporal=None if temporal is None else
                TemporalValidity(raw=temporal["raw"], normalized=temporal["normalized"]),
                provenance=Provenance(frozenset(raw["provenance"])),
                embedding=_decode_vector(raw["embedding"]),
            )
            graph.facts.append(fact)
            for pid in fact.provenance.passage_ids:
                graph.passage_anchors.setdefault(pid, set()).update(
                    (fact.subject_id, fact.object_id))
        for eid in sorted(graph.entities, key=int):
            for alias in sorted(graph.entities[eid].aliases):
                graph._name_index.setdefault(" ".join(alias.split()).casefold(), eid)

        memory.ingest_cursor = data["ingest_cursor"]
        return memory


def snapshot_text(snapshot: dict) -> str:
    return json.dumps(snapshot, indent=2, sort_keys=True, ensure_ascii=True) + "\n"


def build(document: TranscriptDocument, gateway: LLMGateway,
          config: RetrievalConfig | None = None, mode: str = "batch",
          segments: int = DEFAULT_SEGMENTS, out_path: str | Path | None = None,
          quarantine_tolerance: float = DEFAULT_QUARANTINE_TOLERANCE,
          resume: bool = False) -> Memory:
    """Run batch or segmented incremental construction over one transcript.

    Incremental mode splits the passage stream into equal-count chronological
    segments and persists the snapshot after each one; since per-passage
    processing is strictly sequential, both modes end in identical stores.
    """
    if mode not in ("batch", "incremental"):
        raise ValueError(f"unknown mode {mode!r}")
    if segments < 1:
        raise ValueError("segments must be positive")
    passages = document.to_passages()

    memory: Memory | None = None
    if resume and out_path is not None and Path(out_path).exists():
        memory = Memory.load(out_path, gateway)
        if memory.conversation_id != document.conversation_id:
            raise LoadError(
                f"snapshot holds {memory.conversation_id!r}, not "
                f"{document.conversation_id!r}; refusing to resume")
        logger.info("resuming %s from passage %d/%d", document.conversation_id,
                    memory.ingest_cursor, len(passages))
    if memory is None:
        memory = Memory(gateway, config, conversation_id=document.conversation_id)

    total = len(passages)
    budget = quarantine_tolerance * total
    if mode == "batch":
        boundaries = [total]
    else:
        boundaries = [(total * (i + 1)) // segments for i in range(segments)]

    cursor = memory.ingest_cursor
    for boundary in boundaries:
        while cursor < boundary:
            memory.ingest_passage(passages[cursor])
            cursor = memory.ingest_cursor
            if len(memory.episodic.quarantined) > budget:
                partial = None
                if out_path is not None:
                    memory.save(out_path)
                    partial = str(out_path)
                raise BuildAborted(
                    f"{len(memory.episodic.quarantined)} of {total} passages quarantined, "
                    f"beyond the {quarantine_tolerance:.0%} tolerance", partial_path=partial)
        if mode == "incremental" and out_path is not None:
            memory.save(out_path)
    if out_path is not None:
        memory.save(out_path)
    return memory
