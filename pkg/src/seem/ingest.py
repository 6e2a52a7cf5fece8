"""Dataset loaders: transcripts in, chronological passage streams out.

Loaders never fabricate passages: every in-file turn either becomes a
passage or is counted in the malformed report with a line/position
diagnostic. Out-of-order timestamps keep file order and emit a warning.

Supported layouts (schema revisions the loaders are tested against):

jsonl
    One JSON object per line with keys session_id, turn_index, speaker,
    text, and optional timestamp (ISO-8601).

locomo
    Public release: a JSON list of samples; sample["conversation"] maps
    "session_<n>" to a turn list ({"speaker", "text", optional
    "blip_caption"}) with sibling "session_<n>_date_time" strings such as
    "1:56 pm on 8 May, 2023"; sample["qa"] holds question/answer(/
    adversarial_answer)/category with categories 1=multi-hop, 2=temporal,
    3=open-domain, 4=single-hop, 5=adversarial.

longmemeval
    A JSON list of items: question_id, question_type, question, answer,
    haystack_session_ids, haystack_dates, haystack_sessions (lists of
    {"role", "content"} turns). Each item is its own conversation.

qa-json
    One JSON document {"transcript": [jsonl-style turn objects],
    "questions": [{question_id, category, query, gold}]}.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import LoadError
from .evaluation import Category, QAItem
from .model import Passage, passage_id_for
from .times import parse_instant

logger = logging.getLogger(__name__)

FORMATS = ("jsonl", "locomo", "longmemeval", "qa-json")

LOCOMO_CATEGORIES = {
    1: Category.MULTI_HOP,
    2: Category.TEMPORAL,
    3: Category.OPEN_DOMAIN,
    4: Category.SINGLE_HOP,
    5: Category.ADVERSARIAL,
}

LONGMEMEVAL_CATEGORIES = {
    "temporal-reasoning": Category.TEMPORAL,
    "multi-session": Category.MULTI_HOP,
}


@dataclass(frozen=True)
class TurnRecord:
    speaker: str
    text: str
    image_caption: str | None = None

    def rendered_text(self) -> str:
        if self.image_caption:
            base = self.text.strip()
            tagged = f"[Image: {self.image_caption}]"
            return f"{base} {tagged}".strip()
        return self.text


@dataclass(frozen=True)
class SessionRecord:
    session_id: str
    timestamp_text: str | None
    turns: tuple[TurnRecord, ...]


@dataclass(frozen=True)
class TranscriptDocument:
    conversation_id: str
    sessions: tuple[SessionRecord, ...]

    def __post_init__(self) -> None:
        if not self.sessions:
            raise ValueError("a transcript needs at least one session")

    def to_passages(self) -> list[Passage]:
        passages = []
        for session in self.sessions:
            timestamp = parse_instant(session.timestamp_text)
            for turn_index, turn in enumerate(session.turns):
                passages.append(Passage(
                    passage_id=passage_id_for(session.session_id, turn_index),
                    session_id=session.session_id,
                    turn_index=turn_index,
                    speaker=turn.speaker,
                    text=turn.rendered_text(),
                    timestamp=timestamp,
                ))
        return passages


@dataclass
class LoadResult:
    document: TranscriptDocument
    malformed: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class EvalSample:
    """One conversation plus the questions asked over it."""

    document: TranscriptDocument
    questions: tuple[QAItem, ...]
    malformed: tuple[tuple[str, str], ...] = ()
    warnings: tuple[str, ...] = ()


def load_transcript(path: str | Path, format: str) -> LoadResult:
    """Load one transcript; for multi-sample formats, the first sample."""
    samples = load_dataset(path, format)
    first = samples[0]
    return LoadResult(document=first.document, malformed=list(first.malformed),
                      warnings=list(first.warnings))


def load_dataset(path: str | Path, format: str) -> list[EvalSample]:
    path = Path(path)
    if format not in FORMATS:
        raise LoadError(f"unknown format {format!r}; expected one of {FORMATS}")
    if not path.exists():
        raise LoadError(f"no such file: {path}")
    try:
        if format == "jsonl":
            return [_load_jsonl(path)]
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read {path}: {exc}") from None
    if format == "locomo":
        return _load_locomo(raw, path)
    if format == "longmemeval":
        return _load_longmemeval(raw, path)
    return [_load_qa_json(raw, path)]


def _warn_out_of_order(document: TranscriptDocument, warnings: list[str]) -> None:
    previous = None
    for session in document.sessions:
        current = parse_instant(session.timestamp_text)
        if previous is not None and current is not None and current < previous:
            message = (f"session {session.session_id} timestamp {current.isoformat()} "
                       f"precedes an earlier session; keeping file order")
            warnings.append(message)
            logger.warning("%s", message)
        if current is not None:
            previous = current


def _load_jsonl(path: Path) -> EvalSample:
    rows: dict[str, list[tuple[int, dict]]] = {}
    session_order: list[str] = []
    malformed: list[tuple[str, str]] = []
    warnings: list[str] = []
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                malformed.append((f"line {line_no}", f"invalid JSON: {exc}"))
                continue
            problem = _check_jsonl_row(row)
            if problem:
                malformed.append((f"line {line_no}", problem))
                continue
            sid = str(row["session_id"])
            if sid not in rows:
                rows[sid] = []
                session_order.append(sid)
            rows[sid].append((int(row["turn_index"]), row))

    sessions = []
    last_ts = None
    for sid in session_order:
        entries = sorted(rows[sid], key=lambda item: item[0])
        turns = tuple(TurnRecord(speaker=str(r["speaker"]), text=str(r["text"]))
                      for _, r in entries)
        timestamp_text = next(
            (r.get("timestamp") for _, r in entries if r.get("timestamp")), None)
        for _, r in entries:
            ts = parse_instant(r.get("timestamp"))
            if ts is not None and last_ts is not None and ts < last_ts:
                message = (f"timestamp {ts.isoformat()} in session {sid} precedes an "
                           f"earlier turn; keeping file order")
                warnings.append(message)
                logger.warning("%s", message)
            if ts is not None:
                last_ts = ts
        sessions.append(SessionRecord(session_id=sid, timestamp_text=timestamp_text,
                                      turns=turns))
    if not sessions:
        raise LoadError(f"{path} holds no valid passages "
                        f"({len(malformed)} malformed records)")
    document = TranscriptDocument(conversation_id=path.stem, sessions=tuple(sessions))
    return EvalSample(document=document, questions=(), malformed=tuple(malformed),
                      warnings=tuple(warnings))


def _check_jsonl_row(row) -> str | None:
    if not isinstance(row, dict):
        return "record is not an object"
    for key in ("session_id", "turn_index", "speaker", "text"):
        if key not in row:
            return f"missing key {key!r}"
    if not isinstance(row["turn_index"], int) or row["turn_index"] < 0:
        return "turn_index must be a non-negative integer"
    if not str(row["text"]).strip():
        return "text is empty"
    return None


def _load_locomo(raw, path: Path) -> list[EvalSample]:
    if isinstance(raw, dict):
        raw = [raw]
    if not isinstance(raw, list):
        raise LoadError(f"{path}: expected a list of samples")
    samples = []
    for sample_index, entry in enumerate(raw):
        conversation = entry.get("conversation", {})
        session_numbers = sorted(
            int(key.split("_")[1])
            for key in conversation
            if key.startswith("session_") and key.split("_")[1].isdigit()
            and isinstance(conversation[key], list)
        )
        sessions = []
        malformed: list[tuple[str, str]] = []
        for number in session_numbers:
            key = f"session_{number}"
            turns = []
            for turn_index, turn in enumerate(conversation[key]):
                where = f"sample {sample_index} {key} turn {turn_index}"
                if not isinstance(turn, dict) or "speaker" not in turn:
                    malformed.append((where, "missing speaker"))
                    continue
                text = str(turn.get("text", "") or "")
                caption = turn.get("blip_caption") or None
                if not text.strip() and not caption:
                    malformed.append((where, "empty text"))
                    continue
                turns.append(TurnRecord(speaker=str(turn["speaker"]), text=text,
                                        image_caption=caption))
            if turns:
                sessions.append(SessionRecord(
                    session_id=key,
                    timestamp_text=conversation.get(f"{key}_date_time"),
                    turns=tuple(turns),
                ))
        if not sessions:
            continue
        conversation_id = str(entry.get("sample_id", f"sample{sample_index}"))
        document = TranscriptDocument(conversation_id=conversation_id,
                                      sessions=tuple(sessions))
        warnings: list[str] = []
        _warn_out_of_order(document, warnings)
        questions = []
        for qa_index, qa in enumerate(entry.get("qa", [])):
            gold = qa.get("answer", qa.get("adversarial_answer"))
            questions.append(QAItem(
                question_id=f"{conversation_id}:q{qa_index}",
                category=LOCOMO_CATEGORIES.get(qa.get("category"), Category.OTHER),
                query=str(qa.get("question", "")),
                gold=None if gold is None else str(gold),
            ))
        samples.append(EvalSample(document=document, questions=tuple(questions),
                                  malformed=tuple(malformed), warnings=tuple(warnings)))
    if not samples:
        raise LoadError(f"{path}: no usable samples")
    return samples


def _load_longmemeval(raw, path: Path) -> list[EvalSample]:
    if not isinstance(raw, list):
        raise LoadError(f"{path}: expected a list of question items")
    samples = []
    for item_index, item in enumerate(raw):
        question_id = str(item.get("question_id", f"item{item_index}"))
        haystack = item.get("haystack_sessions", [])
        session_ids = item.get("haystack_session_ids", [])
        dates = item.get("haystack_dates", [])
        sessions = []
        malformed: list[tuple[str, str]] = []
        for session_index, turns_raw in enumerate(haystack):
            sid = str(session_ids[session_index]) if session_index < len(session_ids) \
                else f"{question_id}-s{session_index}"
            date_text = dates[session_index] if session_index < len(dates) else None
            turns = []
            for turn_index, turn in enumerate(turns_raw):
                where = f"item {item_index} session {sid} turn {turn_index}"
                if not isinstance(turn, dict) or not str(turn.get("content", "")).strip():
                    malformed.append((where, "missing content"))
                    continue
                turns.append(TurnRecord(speaker=str(turn.get("role", "user")),
                                        text=str(turn["content"])))
            if turns:
                sessions.append(SessionRecord(session_id=sid, timestamp_text=date_text,
                                              turns=tuple(turns)))
        if not sessions:
            continue
        document = TranscriptDocument(conversation_id=question_id, sessions=tuple(sessions))
        warnings: list[str] = []
        _warn_out_of_order(document, warnings)
        category = LONGMEMEVAL_CATEGORIES.get(str(item.get("question_type", "")), Category.OTHER)
        answer = item.get("answer")
        question = QAItem(
            question_id=question_id,
            category=category,
            query=str(item.get("question", "")),
            gold=None if answer is None else str(answer),
        )
        samples.append(EvalSample(document=document, questions=(question,),
                                  malformed=tuple(malformed), warnings=tuple(warnings)))
    if not samples:
        raise LoadError(f"{path}: no usable samples")
    return samples


def _load_qa_json(raw, path: Path) -> EvalSample:
    if not isinstance(raw, dict) or "transcript" not in raw:
        raise LoadError(f"{path}: expected an object with 'transcript'")
    rows: dict[str, list[tuple[int, dict]]] = {}
    session_order: list[str] = []
    malformed: list[tuple[str, str]] = []
    for row_index, row in enumerate(raw["transcript"]):
        problem = _check_jsonl_row(row)
        if problem:
            malformed.append((f"transcript[{row_index}]", problem))
            continue
        sid = str(row["session_id"])
        if sid not in rows:
            rows[sid] = []
            session_order.append(sid)
        rows[sid].append((int(row["turn_index"]), row))
    sessions = []
    for sid in session_order:
        entries = sorted(rows[sid], key=lambda item: item[0])
        sessions.append(SessionRecord(
            session_id=sid,
            timestamp_text=next((r.get("timestamp") for _, r in entries
                                 if r.get("timestamp")), None),
            turns=tuple(TurnRecord(speaker=str(r["speaker"]), text=str(r["text"]))
                        for _, r in entries),
        ))
    if not sessions:
        raise LoadError(f"{path}: transcript holds no valid passages")
    document = TranscriptDocument(conversation_id=str(raw.get("conversation_id", path.stem)),
                                  sessions=tuple(sessions))
    questions = tuple(
        QAItem(
            question_id=str(q.get("question_id", f"q{i}")),
            category=Category.parse(q.get("category", "other")),
            query=str(q.get("query", q.get("question", ""))),
            gold=(None if q.get("gold", q.get("answer")) is None
                  else str(q.get("gold", q.get("answer")))),
        )
        for i, q in enumerate(raw.get("questions", []))
    )
    return EvalSample(document=document, questions=questions,
                      malformed=tuple(malformed))
