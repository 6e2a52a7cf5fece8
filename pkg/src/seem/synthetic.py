"""Engineered synthetic corpora with behavior known by construction.

These generators are tuned to the deterministic gateway's rule tables:
person names are unique capitalized tokens, topics carry a unique lowercase
code token plus an adjective so reply turns land on their own opener in the
top-1 frame lookup, and each group's stated date equals its session day so
the same-event judge sees overlapping calendar days exactly within a group.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as _date, timedelta as _timedelta

from .evaluation import Category, QAItem
from .ingest import SessionRecord, TranscriptDocument, TurnRecord

FIRST_NAMES = (
    "Avery", "Blake", "Carmen", "Dario", "Elena", "Farid", "Greta", "Hugo",
    "Iris", "Jonas", "Kira", "Liam", "Mona", "Nadia", "Omar", "Priya",
    "Quinn", "Rosa", "Stefan", "Tara", "Ugo", "Vera", "Wade", "Xenia",
    "Yusuf", "Zola",
)
ADJECTIVES = (
    "brisk", "mellow", "daring", "quiet", "vivid", "rustic", "breezy",
    "solemn", "spirited", "gentle", "bold", "wry", "earnest", "playful",
    "steadfast",
)
ACTIVITIES = (
    "pottery course", "marathon training", "chess league", "baking class",
    "night photography", "rowing program", "improv workshop",
    "beekeeping project", "mural painting", "tango lessons",
    "birding expedition", "coding bootcamp",
)
THINGS = (
    "golden retriever", "spotted beagle", "vintage bicycle", "walnut bookshelf",
    "lemon tree", "cactus garden", "canvas kayak", "copper kettle",
)
MONTH_NAMES = ("January", "February", "March", "April", "May", "June", "July",
               "August", "September", "October", "November", "December")


@dataclass(frozen=True)
class DayStamp:
    """One calendar day rendered both as prose and as a session timestamp."""

    year: int
    month: int
    day: int

    @classmethod
    def for_index(cls, index: int) -> "DayStamp":
        # one day per index, chronologically increasing and all distinct
        when = _date(2020, 1, 1) + _timedelta(days=index)
        return cls(year=when.year, month=when.month, day=when.day)

    @property
    def text(self) -> str:
        return f"{MONTH_NAMES[self.month - 1]} {self.day}, {self.year}"

    @property
    def stamp(self) -> str:
        return f"{self.year}-{self.month:02d}-{self.day:02d}T09:00:00+00:00"


def _activity(index: int) -> str:
    return (f"{ADJECTIVES[index % len(ADJECTIVES)]} "
            f"{ACTIVITIES[index % len(ACTIVITIES)]} k{index}")


def _person(index: int) -> str:
    return f"{FIRST_NAMES[index % len(FIRST_NAMES)]}{index}"


@dataclass(frozen=True)
class QACorpus:
    document: TranscriptDocument
    questions: tuple[QAItem, ...]
    rpe_question_ids: frozenset[str]


def qa_corpus(num_questions: int = 30, rpe_fraction: float = 0.8,
              seed: int = 7) -> QACorpus:
    """QA suite where most answers live in a turn reachable only through
    fused-frame provenance: the answer date appears in a reply turn that
    yields no graph facts, while the graph-visible statement turn carries no
    date. The remaining questions are answerable from their single turn.
    """
    num_rpe = round(num_questions * rpe_fraction)
    sessions = []
    questions = []
    rpe_ids = []
    for i in range(num_questions):
        person = _person(i + seed)
        day = DayStamp.for_index(i)
        qid = f"q{i:03d}"
        if i < num_rpe:
            topic = _activity(i)
            turns = (
                TurnRecord(speaker="Host", text=f"{person} recently started a {topic}."),
                TurnRecord(speaker=person,
                           text=f"That {topic} began on {day.text} for {person}."),
            )
            questions.append(QAItem(
                question_id=qid, category=Category.TEMPORAL,
                query=f"What day did {person} start the {topic}?", gold=day.text,
            ))
            rpe_ids.append(qid)
        else:
            thing = f"{THINGS[i % len(THINGS)]} k{i}"
            turns = (
                TurnRecord(speaker="Host", text=f"{person} adopted a {thing} on {day.text}."),
            )
            questions.append(QAItem(
                question_id=qid, category=Category.SINGLE_HOP,
                query=f"What day did {person} adopt the {thing}?", gold=day.text,
            ))
        sessions.append(SessionRecord(session_id=f"s{i:03d}", timestamp_text=day.stamp,
                                      turns=turns))
    document = TranscriptDocument(conversation_id=f"qa-corpus-{seed}",
                                  sessions=tuple(sessions))
    return QACorpus(document=document, questions=tuple(questions),
                    rpe_question_ids=frozenset(rpe_ids))


def fusion_corpus(chain_lengths: tuple[int, ...] | None = None,
                  seed: int = 11) -> TranscriptDocument:
    """Transcript whose fusion chains are fixed by construction.

    Each chain is one session about one unique person and topic: the opening
    turn states a dated fact, every follow-up shares the person and resolves
    to the same day through the session timestamp, so the judge fuses the
    whole chain into a single frame whose provenance is exactly the chain.
    """
    if chain_lengths is None:
        # 200 passages: one 8-chain, four 5s, four 4s, ten 3s, thirty 2s, 66 singles.
        chain_lengths = (8,) + (5,) * 4 + (4,) * 4 + (3,) * 10 + (2,) * 30 + (1,) * 66
    sessions = []
    for index, length in enumerate(chain_lengths):
        person = _person(index + seed)
        topic = f"{_activity(index)} c{index}"
        day = DayStamp.for_index(index)
        turns = [TurnRecord(speaker="Host",
                            text=f"{person} started a {topic} on {day.text}.")]
        for step in range(1, length):
            # the reply restates the full topic so its frame lands on its own
            # opener in the top-1 lookup even among hundreds of competitors
            turns.append(TurnRecord(
                speaker=person,
                text=f"{person} loved week {step} of that {topic}. "
                     f"Week {step} of the {topic} left {person} beaming.",
            ))
        sessions.append(SessionRecord(session_id=f"c{index:03d}",
                                      timestamp_text=day.stamp,
                                      turns=tuple(turns)))
    return TranscriptDocument(conversation_id=f"fusion-corpus-{seed}",
                              sessions=tuple(sessions))
