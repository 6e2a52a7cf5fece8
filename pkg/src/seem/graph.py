"""Graph memory layer: quadruple facts over merged entities, plus propagation.

Entity resolution: an exact (casefolded, whitespace-collapsed) alias match
reuses the owning node; otherwise the surface merges into its most similar
live node when cosine >= merge_threshold (alias absorbed, synonymy edge
recorded between the owner and a freshly minted shadow id), else it becomes
a new node. Facts always reference live ids.

Propagation runs restart-biased power iteration over the deduplicated
undirected edge set: fact edges taken in both directions plus synonymy edges
with both endpoints resolved to live owners (edges that contract to a self
loop are dropped). Dangling (isolated) nodes redistribute their mass to the
seed distribution, so scores stay a probability distribution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyGraph, ExtractionFailure, NotFound, SeedError
from .gateway.base import LLMGateway
from .model import (
    EntityNode,
    Passage,
    PassageStore,
    Provenance,
    QuadDraft,
    Quadruple,
    as_unit_vector,
)

logger = logging.getLogger(__name__)

SEED_MASS_TOL = 1e-9


def _name_key(surface: str) -> str:
    return " ".join(surface.split()).casefold()


@dataclass(frozen=True)
class SynonymyEdge:
    """Unordered link between an owner node and the shadow id of an absorbed alias."""

    a: str
    b: str
    similarity: float

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError("synonymy edges are irreflexive")

    def key(self) -> tuple[int, int]:
        lo, hi = sorted((int(self.a), int(self.b)))
        return (lo, hi)


@dataclass(frozen=True)
class GraphStats:
    entities: int
    facts: int
    temporal_anchors: int
    synonymy_edges: int

    def to_dict(self) -> dict:
        return {
            "entities": self.entities,
            "facts": self.facts,
            "temporal_anchors": self.temporal_anchors,
            "synonymy_edges": self.synonymy_edges,
        }


@dataclass(frozen=True)
class PPRResult:
    scores: dict[str, float]
    converged: bool
    iterations: int


def power_iterate(num_nodes: int, edges: set[tuple[int, int]], seeds: dict[int, float],
                  damping: float, tol: float, max_iters: int) -> tuple[np.ndarray, bool, int]:
    """Restart-biased power iteration over an undirected edge set.

    Protocol (pinned so independent implementations agree to float
    round-off): x0 = seed vector; x <- (1-d)*s + d*(W^T x + dangling_mass*s)
    with W the row-stochastic adjacency; stop when the L1 step change drops
    below tol or max_iters is hit.
    """
    s = np.zeros(num_nodes, dtype=np.float64)
    for node, mass in seeds.items():
        s[node] = mass
    neighbors: list[list[int]] = [[] for _ in range(num_nodes)]
    for a, b in edges:
        neighbors[a].append(b)
        neighbors[b].append(a)
    degree = np.array([len(n) for n in neighbors], dtype=np.float64)
    dangling = degree == 0

    w = np.zeros((num_nodes, num_nodes), dtype=np.float64)
    for node, outs in enumerate(neighbors):
        for other in outs:
            w[node, other] = 1.0 / degree[node]

    x = s.copy()
    for iteration in range(1, max_iters + 1):
        spread = w.T @ x + float(x[dangling].sum()) * s
        x_next = (1.0 - damping) * s + damping * spread
        delta = float(np.abs(x_next - x).sum())
        x = x_next
        if delta < tol:
            return x, True, iteration
    return x, False, max_iters


class GraphStore:
    """Entity nodes, fact edges, synonymy edges, and passage anchors."""

    def __init__(self, gateway: LLMGateway, passages: PassageStore, merge_threshold: float = 0.90):
        self.gateway = gateway
        self.passages = passages
        self.merge_threshold = merge_threshold
        self.entities: dict[str, EntityNode] = {}
        self.facts: list[Quadruple] = []
        self.synonymy_edges: list[SynonymyEdge] = []
        self.absorbed: dict[str, tuple[str, str]] = {}  # shadow id -> (surface, owner id)
        self.passage_anchors: dict[str, set[str]] = {}
        self.fact_empty: set[str] = set()
        self.next_entity_id = 0
        self.dim = gateway.embedding_dim
        self._name_index: dict[str, str] = {}
        self._entity_matrix: np.ndarray | None = None
        self._entity_order: list[str] = []
        self._fact_matrix: np.ndarray | None = None

    # -- ingestion -------------------------------------------------------------

    def ingest_passage(self, passage: Passage) -> int:
        """Extract quadruples from one passage; returns the number of facts added."""
        pid = passage.passage_id
        if pid not in self.passages:
            raise NotFound(f"passage {pid!r} is not stored")
        try:
            drafts = self.gateway.extract_quadruples(passage.text, passage.timestamp)
        except ExtractionFailure as exc:
            logger.warning("quadruple extraction failed for %s: %s", pid, exc)
            self.fact_empty.add(pid)
            return 0
        added = 0
        for draft in drafts:
            self.add_fact(draft, pid)
            added += 1
        if added == 0:
            self.fact_empty.add(pid)
        return added

    def add_fact(self, draft: QuadDraft, passage_id: str) -> Quadruple:
        """Resolve a draft's entities and insert the fact with provenance {passage_id}."""
        if passage_id not in self.passages:
            raise NotFound(f"unknown passage {passage_id!r}")
        embedding = self._embed(draft.serialized())
        subject_id = self._resolve_entity(draft.subject, passage_id)
        object_id = self._resolve_entity(draft.object or draft.subject, passage_id)
        fact = Quadruple(
            subject=draft.subject,
            relation=draft.relation,
            object=draft.object,
            subject_id=subject_id,
            object_id=object_id,
            temporal=draft.temporal,
            provenance=Provenance.of(passage_id),
            embedding=embedding,
        )
        self.facts.append(fact)
        self.passage_anchors.setdefault(passage_id, set()).update((subject_id, object_id))
        self._fact_matrix = None
        return fact

    def _embed(self, text: str) -> np.ndarray:
        vec = self.gateway.embed(text)
        if vec.shape != (self.dim,):
            raise DimensionError(f"gateway returned dim {vec.shape}, store expects {self.dim}")
        return as_unit_vector(vec)

    def _resolve_entity(self, surface: str, passage_id: str) -> str:
        key = _name_key(surface)
        hit = self._name_index.get(key)
        if hit is not None:
            self.entities[hit].linked_passages.add(passage_id)
            return hit
        embedding = self._embed(surface)
        owner_id, similarity = self._best_entity(embedding)
        if owner_id is not None and similarity >= self.merge_threshold:
            owner = self.entities[owner_id]
            shadow_id = self._alloc_id()
            self.absorbed[shadow_id] = (surface, owner_id)
            self.synonymy_edges.append(SynonymyEdge(owner_id, shadow_id, similarity))
            owner.aliases.add(surface)
            owner.linked_passages.add(passage_id)
            self._name_index[key] = owner_id
            return owner_id
        entity_id = self._alloc_id()
        self.entities[entity_id] = EntityNode(
            entity_id=entity_id,
            canonical_name=surface,
            aliases={surface},
            embedding=embedding,
            linked_passages={passage_id},
        )
        self._name_index[key] = entity_id
        self._entity_matrix = None
        return entity_id

    def _alloc_id(self) -> str:
        entity_id = str(self.next_entity_id)
        self.next_entity_id += 1
        return entity_id

    def _best_entity(self, embedding: np.ndarray) -> tuple[str | None, float]:
        if not self.entities:
            return None, 0.0
        matrix, order = self._entity_matrix_view()
        scores = matrix @ embedding
        best = 0
        for i in range(1, len(order)):
            if scores[i] > scores[best]:
                best = i
        return order[best], float(scores[best])

    def _entity_matrix_view(self) -> tuple[np.ndarray, list[str]]:
        if self._entity_matrix is None:
            self._entity_order = sorted(self.entities, key=int)
            self._entity_matrix = np.stack(
                [self.entities[eid].embedding for eid in self._entity_order]
            ) if self._entity_order else np.zeros((0, self.dim))
        return self._entity_matrix, self._entity_order

    # -- fact seeding -----------------------------------------------------------

    def topk_facts(self, query_quads: list[QuadDraft], k: int,
                   raw_query: str | None = None) -> list[tuple[Quadruple, float]]:
        """Top-k facts by max-over-query-quads cosine; ties by fact ordinal.

        An empty draft list falls back to embedding the raw query string as a
        single pseudo-quad so under-structured queries never dead-end.
        """
        if k < 1:
            raise ValueError("k must be positive")
        if not self.facts:
            return []
        if query_quads:
            queries = np.stack([self._embed(q.serialized()) for q in query_quads])
        elif raw_query is not None and raw_query.strip():
            queries = self._embed(raw_query)[None, :]
        else:
            raise ValueError("no query quadruples and no raw query to fall back to")
        matrix = self._fact_matrix_view()
        scores = (queries @ matrix.T).max(axis=0)
        ranked = sorted(range(len(self.facts)), key=lambda i: (-scores[i], i))
        return [(self.facts[i], float(scores[i])) for i in ranked[:k]]

    def _fact_matrix_view(self) -> np.ndarray:
        if self._fact_matrix is None:
            self._fact_matrix = np.stack([f.embedding for f in self.facts])
        return self._fact_matrix

    # -- propagation -------------------------------------------------------------

    def live_edges(self) -> set[tuple[int, int]]:
        """Deduplicated undirected edges over dense indices of live entities."""
        _, order = self._entity_matrix_view()
        index = {eid: i for i, eid in enumerate(order)}
        edges: set[tuple[int, int]] = set()
        for fact in self.facts:
            a, b = index[fact.subject_id], index[fact.object_id]
            if a != b:
                edges.add((min(a, b), max(a, b)))
        for edge in self.synonymy_edges:
            a = index[self._resolve_live(edge.a)]
            b = index[self._resolve_live(edge.b)]
            if a != b:
                edges.add((min(a, b), max(a, b)))
        return edges

    def _resolve_live(self, entity_id: str) -> str:
        while entity_id in self.absorbed:
            entity_id = self.absorbed[entity_id][1]
        return entity_id

    def ppr(self, seeds: dict[str, float], damping: float, tol: float,
            max_iters: int) -> PPRResult:
        if not self.entities:
            raise EmptyGraph("propagation over an empty graph")
        _, order = self._entity_matrix_view()
        index = {eid: i for i, eid in enumerate(order)}
        if not seeds:
            raise SeedError("seed distribution is empty")
        dense_seeds: dict[int, float] = {}
        total = 0.0
        for eid, mass in seeds.items():
            if eid not in index:
                raise SeedError(f"seed {eid!r} is not a live entity")
            if mass < 0:
                raise SeedError("seed mass must be non-negative")
            dense_seeds[index[eid]] = dense_seeds.get(index[eid], 0.0) + mass
            total += mass
        if abs(total - 1.0) > SEED_MASS_TOL:
            raise SeedError(f"seed mass sums to {total!r}, expected 1")
        scores, converged, iterations = power_iterate(
            len(order), self.live_edges(), dense_seeds, damping, tol, max_iters)
        if not converged:
            logger.warning("propagation hit max_iters=%d without converging", max_iters)
        return PPRResult(
            scores={eid: float(scores[index[eid]]) for eid in order},
            converged=converged,
            iterations=iterations,
        )

    def passage_scores(self, scores: dict[str, float]) -> dict[str, float]:
        """Aggregate node scores onto passages through their anchors."""
        aggregated: dict[str, float] = {}
        for pid, entity_ids in self.passage_anchors.items():
            value = sum(scores.get(eid, 0.0) for eid in entity_ids)
            if value > 0.0:
                aggregated[pid] = value
        return aggregated

    def passages_from_scores(self, scores: dict[str, float], n: int) -> list[str]:
        """Top-n passages by aggregated anchor score, ties chronological."""
        if n < 1:
            raise ValueError("n must be positive")
        aggregated = self.passage_scores(scores)
        ranked = sorted(aggregated, key=lambda pid: (-aggregated[pid], self.passages.rank(pid)))
        return ranked[:n]

    # -- reporting ---------------------------------------------------------------

    def graph_stats(self) -> GraphStats:
        return GraphStats(
            entities=len(self.entities),
            facts=len(self.facts),
            temporal_anchors=sum(1 for f in self.facts if f.temporal is not None),
            synonymy_edges=len(self.synonymy_edges),
        )

    def audit(self) -> None:
        """Closure checks; raises on violation."""
        for fact in self.facts:
            if fact.subject_id not in self.entities or fact.object_id not in self.entities:
                raise AssertionError(f"fact references dead entity: {fact.serialized()}")
            for pid in fact.provenance.passage_ids:
                if pid not in self.passages:
                    raise AssertionError(f"fact provenance dangling: {pid}")
                anchored = self.passage_anchors.get(pid, set())
                if fact.subject_id not in anchored or fact.object_id not in anchored:
                    raise AssertionError(f"fact entities not anchored to {pid}")
        for pid, entity_ids in self.passage_anchors.items():
            if pid not in self.passages:
                raise AssertionError(f"anchor for unknown passage {pid}")
            for eid in entity_ids:
                if eid not in self.entities:
                    raise AssertionError(f"anchored entity {eid} is not live")
        for edge in self.synonymy_edges:
            if edge.similarity < self.merge_threshold:
                raise AssertionError("synonymy edge below merge threshold")
