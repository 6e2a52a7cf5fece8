"""Hybrid query path: fact seeding, propagation, provenance expansion, synthesis.

The pipeline is: query quadruples -> top-k facts -> seed distribution ->
propagation -> initial passages -> frames linked to those passages ->
reverse provenance expansion under the budget cap -> deterministic context
serialization. Every intermediate is retained in an audit record.

Each stage has an independent toggle so ablations can disable provenance
expansion, frame injection, fact injection, or propagation (the latter falls
back to direct query-passage cosine ranking).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .episodic import EpisodicStore
from .errors import ConfigError, EmptyMemory, ExtractionFailure, InputError
from .gateway.base import LLMGateway
from .graph import GraphStore
from .model import (
    EpisodicEventFrame,
    Passage,
    PassageStore,
    Quadruple,
    RetrievalConfig,
)

logger = logging.getLogger(__name__)

SECTION_A_HEADER = "(A) Original Passages (Grounded Evidence)"
SECTION_B_HEADER = "(B) Episodic Memory Summary"
SECTION_C_HEADER = "(C) Relevant Facts"
EMPTY_SECTION = "(none)"


@dataclass(frozen=True)
class Toggles:
    """Ablation switches; all on by default."""

    rpe: bool = True
    eef: bool = True
    facts: bool = True
    propagation: bool = True

    @classmethod
    def from_names(cls, names) -> "Toggles":
        known = {"no-rpe": "rpe", "no-eef": "eef", "no-facts": "facts", "no-ppr": "propagation"}
        kwargs = {}
        for name in names:
            if name not in known:
                raise InputError(f"unknown toggle {name!r}; expected one of {sorted(known)}")
            kwargs[known[name]] = False
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {"rpe": self.rpe, "eef": self.eef, "facts": self.facts,
                "propagation": self.propagation}


@dataclass(frozen=True)
class SynthesizedContext:
    """Ordered evidence bundle plus its deterministic serialization."""

    section_a_passages: tuple[Passage, ...]
    section_b_frames: tuple[EpisodicEventFrame, ...]
    section_c_facts: tuple[Quadruple, ...]
    serialized: str


@dataclass
class RetrievalAudit:
    """Every intermediate artifact of one retrieval, exportable as JSON."""

    query: str
    toggles: Toggles
    ranking: str  # "ppr" or "direct"
    query_quads: list[str] = field(default_factory=list)
    used_pseudo_quad: bool = False
    k_top: list[dict] = field(default_factory=list)
    seeds: dict[str, float] = field(default_factory=dict)
    ppr_scores: dict[str, float] = field(default_factory=dict)
    ppr_converged: bool | None = None
    ppr_iterations: int | None = None
    passage_scores: dict[str, float] = field(default_factory=dict)
    p_ret: list[str] = field(default_factory=list)
    e_ret: list[str] = field(default_factory=list)
    p_final: list[str] = field(default_factory=list)
    cap: int = 0

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "toggles": self.toggles.to_dict(),
            "ranking": self.ranking,
            "query_quads": list(self.query_quads),
            "used_pseudo_quad": self.used_pseudo_quad,
            "k_top": list(self.k_top),
            "seeds": dict(sorted(self.seeds.items(), key=lambda kv: int(kv[0]))),
            "ppr_scores": dict(sorted(self.ppr_scores.items(), key=lambda kv: int(kv[0]))),
            "ppr_converged": self.ppr_converged,
            "ppr_iterations": self.ppr_iterations,
            "passage_scores": dict(sorted(self.passage_scores.items())),
            "p_ret": list(self.p_ret),
            "e_ret": list(self.e_ret),
            "p_final": list(self.p_final),
            "cap": self.cap,
        }


@dataclass(frozen=True)
class RetrievalResult:
    context: SynthesizedContext
    audit: RetrievalAudit


class Retriever:
    """Stateless orchestrator over read-only store snapshots."""

    def __init__(self, passages: PassageStore, episodic: EpisodicStore, graph: GraphStore,
                 gateway: LLMGateway, config: RetrievalConfig):
        self.passages = passages
        self.episodic = episodic
        self.graph = graph
        self.gateway = gateway
        self.config = config
        self._passage_vectors: dict[str, np.ndarray] = {}

    def retrieve(self, query: str, toggles: Toggles = Toggles()) -> RetrievalResult:
        if not query.strip():
            raise InputError("query must be non-empty")
        if not self.episodic.frames and not self.graph.facts:
            raise EmptyMemory("neither memory layer has content")

        cfg = self.config
        n = cfg.initial_retrieval_size
        cap = cfg.expansion_cap
        use_ppr = toggles.propagation and bool(self.graph.facts)
        audit = RetrievalAudit(query=query, toggles=toggles,
                               ranking="ppr" if use_ppr else "direct", cap=cap)

        k_top = self._seed_facts(query, audit) if self.graph.facts else []
        if use_ppr:
            p_ret, passage_scores = self._propagate(k_top, n, audit)
        else:
            p_ret, passage_scores = self._direct_rank(query, n)
        audit.p_ret = list(p_ret)
        audit.passage_scores = {pid: float(s) for pid, s in passage_scores.items()}

        e_ret: list[EpisodicEventFrame] = []
        if toggles.eef:
            e_ret = self._frames_for(p_ret, passage_scores)
        audit.e_ret = [f.frame_id for f in e_ret]

        p_final = self.rpe(p_ret, e_ret, cap) if toggles.rpe else list(p_ret)
        p_final = self.passages.chronological(p_final)
        audit.p_final = list(p_final)

        context = self.synthesize(
            p_final,
            e_ret if toggles.eef else [],
            [fact for fact, _ in k_top] if toggles.facts else [],
        )
        return RetrievalResult(context=context, audit=audit)

    # -- pipeline stages --------------------------------------------------------

    def _seed_facts(self, query: str, audit: RetrievalAudit) -> list[tuple[Quadruple, float]]:
        try:
            drafts = self.gateway.extract_quadruples(query, None)
        except ExtractionFailure as exc:
            logger.warning("query quadruple extraction failed (%s); using raw query", exc)
            drafts = []
        audit.query_quads = [d.serialized() for d in drafts]
        audit.used_pseudo_quad = not drafts
        k_top = self.graph.topk_facts(drafts, self.config.fact_seed_k, raw_query=query)
        audit.k_top = [
            {"fact": fact.serialized(), "score": float(score)} for fact, score in k_top
        ]
        return k_top

    def _propagate(self, k_top: list[tuple[Quadruple, float]], n: int,
                   audit: RetrievalAudit) -> tuple[list[str], dict[str, float]]:
        seed_ids: list[str] = []
        for fact, _ in k_top:
            for eid in (fact.subject_id, fact.object_id):
                if eid not in seed_ids:
                    seed_ids.append(eid)
        mass = 1.0 / len(seed_ids)
        seeds = {eid: mass for eid in seed_ids}
        audit.seeds = dict(seeds)
        result = self.graph.ppr(seeds, self.config.damping, self.config.ppr_tolerance,
                                self.config.ppr_max_iters)
        audit.ppr_scores = result.scores
        audit.ppr_converged = result.converged
        audit.ppr_iterations = result.iterations
        passage_scores = self.graph.passage_scores(result.scores)
        return self.graph.passages_from_scores(result.scores, n), passage_scores

    def _direct_rank(self, query: str, n: int) -> tuple[list[str], dict[str, float]]:
        query_vec = self.gateway.embed(query)
        scores = {
            pid: float(self._passage_vector(pid) @ query_vec) for pid in self.passages.ids()
        }
        ranked = sorted(scores, key=lambda pid: (-scores[pid], self.passages.rank(pid)))
        return ranked[:n], scores

    def _passage_vector(self, passage_id: str) -> np.ndarray:
        vec = self._passage_vectors.get(passage_id)
        if vec is None:
            vec = self.gateway.embed(self.passages.get(passage_id).text)
            self._passage_vectors[passage_id] = vec
        return vec

    def _frames_for(self, p_ret: list[str],
                    passage_scores: dict[str, float]) -> list[EpisodicEventFrame]:
        frame_ids: set[str] = set()
        for pid in p_ret:
            frame_ids.update(self.episodic.passage_index.get(pid, ()))
        frames = [self.episodic.frames[fid] for fid in frame_ids]

        def relevance(frame: EpisodicEventFrame) -> float:
            return max((passage_scores.get(pid, 0.0) for pid in frame.provenance.passage_ids),
                       default=0.0)

        return sorted(frames, key=lambda f: (-relevance(f), f.created_seq))

    def rpe(self, p_ret: list[str], e_ret: list[EpisodicEventFrame], cap: int) -> list[str]:
        """Expand the initial passages with frame provenance, admitted in
        (frame relevance rank, then chronological) order until the cap binds;
        the result is returned in chronological order and always contains p_ret.
        """
        if cap < len(p_ret):
            raise ConfigError(f"cap {cap} is below the initial retrieval size {len(p_ret)}")
        included: dict[str, None] = dict.fromkeys(p_ret)
        for frame in e_ret:
            for pid in self.passages.chronological(frame.provenance.passage_ids):
                if len(included) >= cap:
                    break
                if pid not in included:
                    included[pid] = None
        return self.passages.chronological(included.keys())

    # -- serialization ------------------------------------------------------------

    def synthesize(self, p_final: list[str], e_ret: list[EpisodicEventFrame],
                   k_top: list[Quadruple]) -> SynthesizedContext:
        passages = tuple(self.passages.get(pid) for pid in p_final)
        frames = tuple(e_ret)
        facts = tuple(k_top)
        return SynthesizedContext(
            section_a_passages=passages,
            section_b_frames=frames,
            section_c_facts=facts,
            serialized=render_context(passages, frames, facts),
        )


def render_passage_line(passage: Passage) -> str:
    when = passage.timestamp.isoformat() if passage.timestamp is not None else "unknown time"
    return f"[{when}] {passage.speaker}: {passage.text}"


def render_event_line(event) -> str:
    parts = []
    if event.participants:
        parts.append("participants: " + ", ".join(event.participants))
    if event.actions:
        parts.append("actions: " + " | ".join(event.actions))
    for role in ("time", "location", "causality", "manner"):
        value = getattr(event, role)
        if value is not None:
            parts.append(f"{role}: {value}")
    return "  * " + "; ".join(parts)


def render_fact_line(fact: Quadruple) -> str:
    tau = fact.temporal.text if fact.temporal is not None else "?"
    return f"({fact.subject}, {fact.relation}, {fact.object}, {tau})"


def render_context(passages, frames, facts) -> str:
    """Byte-stable serialization with the exact section headers the generator expects."""
    lines = [SECTION_A_HEADER]
    if passages:
        lines.extend(render_passage_line(p) for p in passages)
    else:
        lines.append(EMPTY_SECTION)
    lines.append("")
    lines.append(SECTION_B_HEADER)
    if frames:
        for frame in frames:
            lines.append(f"- {frame.summary}")
            lines.extend(render_event_line(e) for e in frame.events)
    else:
        lines.append(EMPTY_SECTION)
    lines.append("")
    lines.append(SECTION_C_HEADER)
    if facts:
        lines.extend(render_fact_line(f) for f in facts)
    else:
        lines.append(EMPTY_SECTION)
    return "\n".join(lines) + "\n"
