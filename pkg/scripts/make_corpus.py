#!/usr/bin/env python3
"""Write the engineered synthetic corpora to disk.

Produces a qa-json dataset (transcript + questions, loadable by
`seem eval --format qa-json`) and/or a plain JSONL transcript of the fusion
corpus (loadable by `seem ingest --format jsonl`).
"""

import argparse
import json
from pathlib import Path

from seem.synthetic import fusion_corpus, qa_corpus


def document_rows(document):
    rows = []
    for session in document.sessions:
        for turn_index, turn in enumerate(session.turns):
            rows.append({
                "session_id": session.session_id,
                "turn_index": turn_index,
                "speaker": turn.speaker,
                "timestamp": session.timestamp_text,
                "text": turn.rendered_text(),
            })
    return rows


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", type=Path, default=Path("corpora"))
    parser.add_argument("--questions", type=int, default=30)
    parser.add_argument("--rpe-fraction", type=float, default=0.8)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    corpus = qa_corpus(num_questions=args.questions,
                       rpe_fraction=args.rpe_fraction, seed=args.seed)
    qa_path = args.out_dir / "qa_dataset.json"
    qa_path.write_text(json.dumps({
        "conversation_id": corpus.document.conversation_id,
        "transcript": document_rows(corpus.document),
        "questions": [
            {"question_id": q.question_id, "category": q.category.value,
             "query": q.query, "gold": q.gold}
            for q in corpus.questions
        ],
    }, indent=2) + "\n", encoding="utf-8")

    fusion_path = args.out_dir / "fusion_transcript.jsonl"
    rows = document_rows(fusion_corpus(seed=args.seed))
    fusion_path.write_text(
        "\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")

    print(f"wrote {qa_path} ({args.questions} questions) and "
          f"{fusion_path} ({len(rows)} turns)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
