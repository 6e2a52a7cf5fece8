"""Answer generation over retrieved context, plus the QA evaluation harness.

Evaluation parallelizes across questions with a bounded worker pool;
aggregation is a commutative reduction ordered by question index, so reports
are byte-identical across runs and worker counts.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .errors import InputError
from .metrics import bleu1, exact_match, token_f1
from .retrieval import RetrievalAudit, Retriever, Toggles

logger = logging.getLogger(__name__)


class Category(str, Enum):
    SINGLE_HOP = "single-hop"
    MULTI_HOP = "multi-hop"
    TEMPORAL = "temporal"
    OPEN_DOMAIN = "open-domain"
    ADVERSARIAL = "adversarial"
    OTHER = "other"

    @classmethod
    def parse(cls, value) -> "Category":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value))
        except ValueError:
            return cls.OTHER


@dataclass(frozen=True)
class QAItem:
    question_id: str
    category: Category
    query: str
    gold: str | None


@dataclass(frozen=True)
class EvalRecord:
    question_id: str
    category: Category
    query: str
    gold: str
    prediction: str
    f1: float
    bleu1: float
    judge_verdict: bool | None
    audit_ref: str

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "category": self.category.value,
            "query": self.query,
            "gold": self.gold,
            "prediction": self.prediction,
            "f1": self.f1,
            "bleu1": self.bleu1,
            "judge_verdict": self.judge_verdict,
            "audit_ref": self.audit_ref,
        }


@dataclass
class EvalReport:
    records: list[EvalRecord]
    skipped: int
    audits: dict[str, RetrievalAudit]

    def aggregates(self) -> dict:
        def bucket(records: list[EvalRecord]) -> dict:
            count = len(records)
            out = {
                "count": count,
                "f1": sum(r.f1 for r in records) / count if count else None,
                "bleu1": sum(r.bleu1 for r in records) / count if count else None,
                "exact": sum(exact_match(r.prediction, r.gold) for r in records) / count
                if count else None,
            }
            verdicts = [r.judge_verdict for r in records if r.judge_verdict is not None]
            out["judge"] = sum(verdicts) / len(verdicts) if verdicts else None
            return out

        by_category = {}
        for category in Category:
            members = [r for r in self.records if r.category is category]
            if members:
                by_category[category.value] = bucket(members)
        return {
            "overall": bucket(self.records),
            "by_category": by_category,
            "skipped": self.skipped,
        }

    def to_dict(self) -> dict:
        data = self.aggregates()
        data["records"] = [r.to_dict() for r in self.records]
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        """Aligned per-category table in the usual category-breakdown layout."""
        aggregates = self.aggregates()
        rows = [("Category", "Count", "F1", "BLEU-1", "Exact", "Judge")]
        entries = list(aggregates["by_category"].items()) + [("overall", aggregates["overall"])]
        for name, stats in entries:
            rows.append((
                name,
                str(stats["count"]),
                _fmt(stats["f1"]),
                _fmt(stats["bleu1"]),
                _fmt(stats["exact"]),
                _fmt(stats["judge"]),
            ))
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
                 for row in rows]
        if self.skipped:
            lines.append(f"(skipped {self.skipped} questions without gold answers)")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["question_id", "category", "query", "gold", "prediction",
                         "f1", "bleu1", "judge_verdict", "audit_ref"])
        for r in self.records:
            writer.writerow([r.question_id, r.category.value, r.query, r.gold, r.prediction,
                             f"{r.f1:.6f}", f"{r.bleu1:.6f}",
                             "" if r.judge_verdict is None else str(r.judge_verdict).lower(),
                             r.audit_ref])
        return buffer.getvalue()


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.4f}"


def answer(retriever: Retriever, query: str,
           toggles: Toggles = Toggles()) -> tuple[str, RetrievalAudit]:
    """Retrieve, generate, and return the answer with its audit record."""
    if not query.strip():
        raise InputError("query must be non-empty")
    result = retriever.retrieve(query, toggles)
    generation = retriever.gateway.generate_answer(query, result.context)
    if not generation.parsed:
        logger.warning("completion had no answer marker; returning it whole")
    return generation.answer, result.audit


JudgeFn = Callable[[str, str, str], bool]


def exact_match_judge(query: str, gold: str, prediction: str) -> bool:
    return exact_match(prediction, gold)


def run_eval(retriever: Retriever, questions: list[QAItem],
             toggles: Toggles = Toggles(), judge: JudgeFn | None = None,
             workers: int = 1) -> EvalReport:
    """Answer every question and aggregate per-category and overall metrics."""
    usable: list[tuple[int, QAItem]] = []
    skipped = 0
    for index, item in enumerate(questions):
        if item.gold is None or not str(item.gold).strip():
            logger.warning("question %s has no gold answer; skipping", item.question_id)
            skipped += 1
            continue
        usable.append((index, item))

    def solve(entry: tuple[int, QAItem]) -> tuple[int, EvalRecord, RetrievalAudit]:
        index, item = entry
        prediction, audit = answer(retriever, item.query, toggles)
        verdict = judge(item.query, item.gold, prediction) if judge is not None else None
        record = EvalRecord(
            question_id=item.question_id,
            category=item.category,
            query=item.query,
            gold=item.gold,
            prediction=prediction,
            f1=token_f1(prediction, item.gold),
            bleu1=bleu1(prediction, item.gold),
            judge_verdict=verdict,
            audit_ref=f"q{index:05d}",
        )
        return index, record, audit

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(solve, usable))
    else:
        solved = [solve(entry) for entry in usable]
    solved.sort(key=lambda item: item[0])
    records = [record for _, record, _ in solved]
    audits = {record.audit_ref: audit for _, record, audit in solved}
    return EvalReport(records=records, skipped=skipped, audits=audits)
