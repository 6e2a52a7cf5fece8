"""Deterministic rule-based gateway: the offline stand-in for every model role.

Every capability is a pure function of its inputs, byte-identical across runs
and platforms. The rules below are the documented contract tests compute
against; none of them consult wall clock, RNG state, or the environment.

Embedding
    tokens     = lowercase alphanumeric runs
    features   = token unigrams + adjacent-pair bigrams ("a b"); empty text
                 falls back to the single feature ""
    projection = per feature f: d = blake2b(f, digest_size=8, key=seed-LE8);
                 index = LE-uint32(d[0:4]) mod dim; sign = +1 if d[4] is odd
                 else -1; accumulate sign at index
    output     = L2-normalized accumulator (if it cancels to zero, a unit
                 spike at index 0)

Frame extraction (per sentence, one event each)
    time       = date text after one of on/since/from/until/in; when absent,
                 the passage timestamp's ISO date; else None
    location   = capitalized run after at/in, once time spans are removed
    causality  = phrase after "because"
    manner     = phrase after "through"/"via"
    participants = capitalized runs of the remaining text, leading stopwords
                 stripped, order-preserving unique
    actions    = the original sentence, trailing punctuation removed
    events are emitted in canonical chronological order (day-resolvable
    times first, by day, stable otherwise); summary = whitespace-collapsed
    passage text

Quadruple extraction (per sentence, at most one draft)
    temporal   = first marker+date span, normalized (since/from -> "from X",
                 until -> "until X", on/in -> the date), removed from the text
    question   = "did <CapRun> <verb-phrase> <object>" via the verb table
    declarative = earliest verb-table match; subject = last capitalized run
                 before it; object = text after it, leading articles and
                 possessives stripped
    drafts with an empty subject, relation, or object are not emitted

Same-event judge
    true iff the frames are content-identical (reflexivity), else iff
    participant overlap >= 1 (casefold) AND day-set overlap >= 1, where a
    frame's day set is every day-resolvable event time

Frame fusion
    order the two frames by created_seq; summary = the older frame's summary
    (the scene's opening statement keeps anchoring candidate lookup, so a
    fused frame never drifts toward reply phrasing); events = concatenation
    deduplicated by exact actions tuple, then canonically re-sorted. Fusing
    a frame with itself therefore reproduces its content exactly.

Answer generation
    emits "Thought: ...\\nAnswer: ..." so the shared marker parser is
    exercised; answers only on exact keyword hits. Candidate passages must
    contain every capitalized query entity; date/where/who questions scan
    candidates for the matching pattern, other questions try the provided
    facts (subject + relation match; date questions use the fact's temporal
    text) and then quadruples re-extracted from candidate passages. No hit
    anywhere -> "not mentioned"; an entirely empty context -> "unknown".
"""

from __future__ import annotations

import re
from hashlib import blake2b

import numpy as np

from ..errors import ExtractionFailure
from ..model import Passage, QuadDraft, SemanticRoleEvent, TemporalValidity
from ..times import DATE_TEXT, DATE_TEXT_RE, normalize_date_text, resolve_day
from .base import ExtractionResult, GenerationResult, LLMGateway, parse_answer

TOKEN_RE = re.compile(r"[a-z0-9]+")
SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
CAP_RUN_RE = re.compile(r"[A-Z][\w'-]*(?:\s+[A-Z][\w'-]*)*")
TIME_MARK_RE = re.compile(rf"\b(on|since|from|until|in)\s+({DATE_TEXT})")
LOCATION_RE = re.compile(r"\b(?:at|in)\s+([A-Z][\w'-]*(?:\s+[A-Z][\w'-]*)*)")
CAUSALITY_RE = re.compile(r"\bbecause\s+([^,.!?;]+)", re.IGNORECASE)
MANNER_RE = re.compile(r"\b(?:through|via)\s+([^,.!?;]+)", re.IGNORECASE)

# Leading tokens stripped from capitalized runs before they count as names.
RUN_STOPWORDS = frozenset(
    """I He She It We They You The This That These Those My His Her Their Our
    Your Its Yes No Oh Okay Ok Hey Hi Hello Wow Hmm Well But And Or So If Then
    There Here Not Just Also What When Where Who Whom Whose Why How Which Do
    Did Does Is Are Was Were Will Would Could Should Can May Might Yesterday
    Today Tomorrow Because Through Via On In At Since From Until January
    February March April June July August September October November
    December""".split()
)

# Surface verb phrase -> canonical relation; longest surface wins a position.
VERB_TABLE: tuple[tuple[str, str], ...] = (
    ("got into", "got_into"), ("gets into", "got_into"), ("get into", "got_into"),
    ("moved to", "moved_to"), ("moves to", "moved_to"), ("move to", "moved_to"),
    ("lives in", "lives_in"), ("lived in", "lives_in"), ("live in", "lives_in"),
    ("works at", "works_at"), ("worked at", "works_at"), ("work at", "works_at"),
    ("has owned", "owns"), ("have owned", "owns"), ("owned", "owns"),
    ("owns", "owns"), ("own", "owns"),
    ("adopted", "adopted"), ("adopts", "adopted"), ("adopt", "adopted"),
    ("visited", "visited"), ("visits", "visited"), ("visit", "visited"),
    ("started", "started"), ("starts", "started"), ("start", "started"),
    ("met", "met"), ("meets", "met"), ("meet", "met"),
    ("reads", "read"), ("read", "read"),
    ("bought", "bought"), ("buys", "bought"), ("buy", "bought"),
    ("joined", "joined"), ("joins", "joined"), ("join", "joined"),
    ("won", "won"), ("wins", "won"), ("win", "won"),
    ("painted", "painted"), ("paints", "painted"), ("paint", "painted"),
    ("planted", "planted"), ("plants", "planted"), ("plant", "planted"),
)
_VERB_SURFACES = sorted((s for s, _ in VERB_TABLE), key=len, reverse=True)
_VERB_CANON = dict(VERB_TABLE)
VERB_RE = re.compile(r"\b(?:" + "|".join(re.escape(s) for s in _VERB_SURFACES) + r")\b", re.IGNORECASE)
QUESTION_RE = re.compile(r"\bdid\s+([A-Z][\w'-]*(?:\s+[A-Z][\w'-]*)*)\s+(.+)", re.DOTALL)
_OBJECT_LEAD = frozenset({"a", "an", "the", "his", "her", "their", "my", "your", "our", "its"})
_QUERY_STOPWORDS = frozenset(
    """what when where who whom whose why how which did do does is are was
    were the a an day date of to in on at for about his her their my your our
    its and or""".split()
)


def tokens_of(text: str) -> list[str]:
    return TOKEN_RE.findall(text.lower())


def features_of(text: str) -> list[str]:
    toks = tokens_of(text)
    if not toks:
        return [""]
    return toks + [f"{a} {b}" for a, b in zip(toks, toks[1:])]


def hash_projection(feature: str, dim: int, seed: int) -> tuple[int, float]:
    digest = blake2b(feature.encode("utf-8"), digest_size=8,
                     key=seed.to_bytes(8, "little")).digest()
    index = int.from_bytes(digest[:4], "little") % dim
    sign = 1.0 if digest[4] & 1 else -1.0
    return index, sign


def split_sentences(text: str) -> list[str]:
    parts = [s.strip() for s in SENTENCE_SPLIT_RE.split(text.strip())]
    parts = [s for s in parts if s]
    return parts if parts else [text.strip()]


def capitalized_runs(text: str) -> list[tuple[str, int, int]]:
    """Maximal capitalized-token runs with spans, leading stopwords stripped."""
    found = []
    for m in CAP_RUN_RE.finditer(text):
        toks = m.group(0).split()
        start = m.start()
        while toks and toks[0] in RUN_STOPWORDS:
            start += len(toks[0]) + 1
            toks.pop(0)
        if toks:
            name = " ".join(toks)
            found.append((name, start, m.end()))
    return found


def _strip_object(text: str) -> str:
    text = re.sub(r"^[\s,;:–—-]+|[\s,.!?;:–—-]+$", "", text)
    toks = text.split()
    while toks and toks[0].lower() in _OBJECT_LEAD:
        toks.pop(0)
    return " ".join(toks)


def _normalize_temporal(marker: str, date_text: str) -> TemporalValidity:
    norm = normalize_date_text(date_text)
    marker = marker.lower()
    if norm is not None and marker in ("since", "from"):
        norm = f"from {norm}"
    elif norm is not None and marker == "until":
        norm = f"until {norm}"
    return TemporalValidity(raw=f"{marker} {date_text}", normalized=norm)


def event_sort_key(indexed_event: tuple[int, SemanticRoleEvent]) -> tuple:
    """Canonical chronological order: day-resolvable first by day, else stable."""
    idx, event = indexed_event
    day = resolve_day(event.time)
    if day is not None:
        return (0, day.toordinal(), idx)
    return (1, 0, idx)


def order_events(events: list[SemanticRoleEvent]) -> tuple[SemanticRoleEvent, ...]:
    return tuple(e for _, e in sorted(enumerate(events), key=event_sort_key))


class MockGateway(LLMGateway):
    """Pure-function gateway implementing the documented rule tables."""

    def __init__(self, dim: int = 256, seed: int = 0):
        if dim < 1:
            raise ValueError("embedding dim must be positive")
        self.embedding_dim = dim
        self.seed = seed

    def fingerprint(self) -> str:
        return f"mock:v1:dim={self.embedding_dim}:seed={self.seed}"

    # -- embedding ---------------------------------------------------------

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.embedding_dim, dtype=np.float64)
        for feature in features_of(text):
            index, sign = hash_projection(feature, self.embedding_dim, self.seed)
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm

    # -- frame extraction --------------------------------------------------

    def extract_frame(self, passage: Passage) -> ExtractionResult:
        if not passage.text.strip():
            raise ExtractionFailure("empty passage text")
        fallback_time = (
            passage.timestamp.date().isoformat() if passage.timestamp is not None else None
        )
        events = []
        for sentence in split_sentences(passage.text):
            events.append(self._extract_event(sentence, fallback_time))
        summary = " ".join(passage.text.split())
        return ExtractionResult(summary=summary, events=order_events(events))

    def _extract_event(self, sentence: str, fallback_time: str | None) -> SemanticRoleEvent:
        working = sentence
        time_slot = None
        m = TIME_MARK_RE.search(working)
        if m:
            time_slot = m.group(2)
            working = working[:m.start()] + " " + working[m.end():]
        elif fallback_time is not None:
            time_slot = fallback_time
        location = None
        m = LOCATION_RE.search(working)
        if m:
            location = m.group(1)
            working = working[:m.start()] + " " + working[m.end():]
        causality = None
        m = CAUSALITY_RE.search(working)
        if m:
            causality = m.group(1).strip()
            working = working[:m.start()] + " " + working[m.end():]
        manner = None
        m = MANNER_RE.search(working)
        if m:
            manner = m.group(1).strip()
            working = working[:m.start()] + " " + working[m.end():]
        participants = []
        for name, _, _ in capitalized_runs(working):
            if name not in participants:
                participants.append(name)
        action = sentence.rstrip(" .!?")
        return SemanticRoleEvent(
            participants=tuple(participants),
            actions=(action,) if action else (),
            time=time_slot,
            location=location,
            causality=causality,
            manner=manner,
        )

    # -- quadruple extraction ----------------------------------------------

    def extract_quadruples(self, text: str, reference_time=None) -> list[QuadDraft]:
        if not text.strip():
            raise ExtractionFailure("empty text")
        drafts = []
        for sentence in split_sentences(text):
            draft = self._extract_quad(sentence)
            if draft is not None:
                drafts.append(draft)
        return drafts

    def _extract_quad(self, sentence: str) -> QuadDraft | None:
        temporal = None
        working = sentence
        m = TIME_MARK_RE.search(working)
        if m:
            temporal = _normalize_temporal(m.group(1), m.group(2))
            working = working[:m.start()] + " " + working[m.end():]

        qm = QUESTION_RE.search(working)
        if qm:
            subject_toks = qm.group(1).split()
            while subject_toks and subject_toks[0] in RUN_STOPWORDS:
                subject_toks.pop(0)
            rest = qm.group(2).strip()
            rest_lower = rest.lower()
            for surface in _VERB_SURFACES:
                if rest_lower.startswith(surface) and (
                    len(rest) == len(surface) or not rest[len(surface)].isalnum()
                ):
                    obj = _strip_object(rest[len(surface):])
                    if subject_toks and obj:
                        return QuadDraft(
                            subject=" ".join(subject_toks),
                            relation=_VERB_CANON[surface],
                            object=obj,
                            temporal=temporal,
                        )
                    break

        vm = VERB_RE.search(working)
        if not vm:
            return None
        relation = _VERB_CANON[vm.group(0).lower()]
        subject = None
        for name, _, end in capitalized_runs(working[:vm.start()]):
            if end <= vm.start():
                subject = name
        obj = _strip_object(working[vm.end():])
        if subject and obj:
            return QuadDraft(subject=subject, relation=relation, object=obj, temporal=temporal)
        return None

    # -- same-event judge ----------------------------------------------------

    def judge_same_event(self, candidate, previous) -> bool:
        if candidate.summary == previous.summary and candidate.events == previous.events:
            return True
        return bool(
            self._participants(candidate) & self._participants(previous)
        ) and bool(self._days(candidate) & self._days(previous))

    @staticmethod
    def _participants(frame) -> set[str]:
        return {p.casefold() for event in frame.events for p in event.participants}

    @staticmethod
    def _days(frame) -> set:
        days = set()
        for event in frame.events:
            day = resolve_day(event.time)
            if day is not None:
                days.add(day)
        return days

    # -- frame fusion --------------------------------------------------------

    def fuse_frames(self, candidate, previous, sources: list[Passage]) -> ExtractionResult:
        first, second = sorted((previous, candidate), key=lambda f: f.created_seq)
        merged: list[SemanticRoleEvent] = []
        seen_actions: set[tuple[str, ...]] = set()
        for event in (*first.events, *second.events):
            if event.actions in seen_actions:
                continue
            seen_actions.add(event.actions)
            merged.append(event)
        return ExtractionResult(summary=first.summary, events=order_events(merged))

    # -- answer generation ---------------------------------------------------

    def generate_answer(self, query: str, context) -> GenerationResult:
        answer, trace = self._answer(query, context)
        return parse_answer(f"Thought: {trace}\nAnswer: {answer}")

    def _answer(self, query: str, context) -> tuple[str, str]:
        passages = list(getattr(context, "section_a_passages", []) or [])
        frames = list(getattr(context, "section_b_frames", []) or [])
        facts = list(getattr(context, "section_c_facts", []) or [])
        if not passages and not frames and not facts:
            return "unknown", "context is empty"

        q_entities = [name for name, _, _ in capitalized_runs(query)]
        q_tokens = [t for t in tokens_of(query) if t not in _QUERY_STOPWORDS]
        if q_entities:
            candidates = [
                p for p in passages
                if all(e.casefold() in p.text.casefold() for e in q_entities)
            ]
        else:
            candidates = [
                p for p in passages
                if any(t in tokens_of(p.text) for t in q_tokens)
            ]

        q_lower = query.lower()
        date_kind = re.search(r"\b(what day|what date|when)\b", q_lower) is not None
        if date_kind:
            for p in candidates:
                m = DATE_TEXT_RE.search(p.text)
                if m:
                    return m.group(0), f"date found in {p.passage_id}"
        elif re.search(r"\bwhere\b", q_lower):
            for p in candidates:
                m = LOCATION_RE.search(p.text)
                if m:
                    return m.group(1), f"location found in {p.passage_id}"
            return "not mentioned", "no location in matching passages"
        elif re.search(r"\bwho\b", q_lower):
            taken = {e.casefold() for e in q_entities}
            for p in candidates:
                for name, _, _ in capitalized_runs(p.text):
                    if name.casefold() not in taken:
                        return name, f"name found in {p.passage_id}"
            return "not mentioned", "no new name in matching passages"

        vm = VERB_RE.search(q_lower)
        q_rel = _VERB_CANON[vm.group(0).lower()] if vm else None
        entity_keys = {e.casefold() for e in q_entities}
        for fact in facts:
            if fact.subject.casefold() in entity_keys and (q_rel is None or fact.relation == q_rel):
                if date_kind:
                    if fact.temporal is not None:
                        return fact.temporal.text, "fact temporal route"
                    continue
                return fact.object, "fact route"
        for p in candidates:
            for draft in self.extract_quadruples(p.text):
                if draft.subject.casefold() in entity_keys and (
                    q_rel is None or draft.relation == q_rel
                ):
                    if date_kind:
                        continue
                    return draft.object, f"passage quad route via {p.passage_id}"
        return "not mentioned", "no evidence matched the query keywords"
