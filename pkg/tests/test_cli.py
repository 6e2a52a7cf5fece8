import json

import pytest

from seem.cli import main
from seem.synthetic import qa_corpus


def write_jsonl_transcript(path):
    rows = [
        {"session_id": "s", "turn_index": 0, "speaker": "Host",
         "timestamp": "2024-01-06T10:00:00",
         "text": "Tim got into his study abroad program on January 5, 2024."},
        {"session_id": "s", "turn_index": 1, "speaker": "Tim",
         "timestamp": "2024-01-06T10:01:00",
         "text": "Tim felt thrilled about it."},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
    return path


def write_qa_dataset(path, num_questions=6):
    corpus = qa_corpus(num_questions=num_questions, seed=3)
    transcript = []
    for session in corpus.document.sessions:
        for turn_index, turn in enumerate(session.turns):
            transcript.append({
                "session_id": session.session_id,
                "turn_index": turn_index,
                "speaker": turn.speaker,
                "timestamp": session.timestamp_text,
                "text": turn.text,
            })
    payload = {
        "conversation_id": corpus.document.conversation_id,
        "transcript": transcript,
        "questions": [
            {"question_id": q.question_id, "category": q.category.value,
             "query": q.query, "gold": q.gold}
            for q in corpus.questions
        ],
    }
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


@pytest.fixture
def snapshot(tmp_path):
    transcript = write_jsonl_transcript(tmp_path / "t.jsonl")
    out = tmp_path / "snap.json"
    code = main(["ingest", str(transcript), "--format", "jsonl",
                 "--out", str(out), "--seed", "5"])
    assert code == 0
    return out


class TestIngest:
    def test_summary_json_on_stdout(self, tmp_path, capsys):
        transcript = write_jsonl_transcript(tmp_path / "t.jsonl")
        out = tmp_path / "snap.json"
        assert main(["ingest", str(transcript), "--out", str(out)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["passages"] == 2
        assert summary["snapshot"] == str(out)
        assert out.exists()

    def test_incremental_mode(self, tmp_path, capsys):
        transcript = write_jsonl_transcript(tmp_path / "t.jsonl")
        out = tmp_path / "snap.json"
        assert main(["ingest", str(transcript), "--mode", "incremental",
                     "--segments", "2", "--out", str(out)]) == 0
        assert out.exists()


class TestQuery:
    def test_answer_printed(self, snapshot, capsys):
        code = main(["query", "--snapshot", str(snapshot), "--question",
                     "What day did Tim get into his study abroad program?"])
        assert code == 0
        assert capsys.readouterr().out.strip() == "January 5, 2024"

    def test_seed_recovered_from_fingerprint(self, snapshot, capsys):
        # no --seed passed; the mock gateway must be rebuilt from the snapshot
        code = main(["query", "--snapshot", str(snapshot), "--question",
                     "What day did Tim get into his study abroad program?"])
        assert code == 0

    def test_explain_emits_audit_json(self, snapshot, capsys):
        code = main(["query", "--snapshot", str(snapshot), "--explain", "--question",
                     "What day did Tim get into his study abroad program?"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["answer"] == "January 5, 2024"
        audit = payload["audit"]
        for key in ("k_top", "ppr_scores", "p_ret", "p_final", "seeds", "cap"):
            assert key in audit
        assert audit["p_ret"] == ["s:0"]

    def test_explain_matches_frozen_golden_audit(self, tmp_path, capsys):
        from pathlib import Path
        rows = [{"session_id": "s", "turn_index": 0, "speaker": "Tim",
                 "timestamp": "2024-01-06T10:00:00",
                 "text": "Tim got into his study abroad program on January 5, 2024."}]
        transcript = tmp_path / "t.jsonl"
        transcript.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        snap = tmp_path / "snap.json"
        assert main(["ingest", str(transcript), "--out", str(snap)]) == 0
        capsys.readouterr()
        out = tmp_path / "audit.json"
        assert main(["query", "--snapshot", str(snap), "--explain", "--out", str(out),
                     "--question",
                     "What day did Tim get into his study abroad program?"]) == 0
        golden = Path(__file__).parent / "golden" / "audit_tim.json"
        assert out.read_text(encoding="utf-8") == golden.read_text(encoding="utf-8")

    def test_toggle_contract_no_rpe(self, snapshot, capsys):
        code = main(["query", "--snapshot", str(snapshot), "--explain",
                     "--toggle", "no-rpe", "--question",
                     "What day did Tim get into his study abroad program?"])
        assert code == 0
        audit = json.loads(capsys.readouterr().out)["audit"]
        assert audit["p_final"] == audit["p_ret"]
        assert audit["toggles"]["rpe"] is False

    def test_missing_snapshot_exits_one(self, tmp_path, capsys):
        code = main(["query", "--snapshot", str(tmp_path / "none.json"),
                     "--question", "anything"])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestStats:
    def test_eml_table(self, snapshot, capsys):
        assert main(["stats", "--snapshot", str(snapshot), "--layer", "eml"]) == 0
        out = capsys.readouterr().out
        assert "Passages per Memory" in out
        assert "Consolidation Ratio" in out

    def test_gml_table(self, snapshot, capsys):
        assert main(["stats", "--snapshot", str(snapshot), "--layer", "gml"]) == 0
        out = capsys.readouterr().out
        for row in ("Entities", "Facts", "Temporal Anchors", "Synonymy Edges", "Average"):
            assert row in out

    def test_json_shapes(self, snapshot, capsys):
        assert main(["stats", "--snapshot", str(snapshot), "--layer", "all",
                     "--json"]) == 0
        blob = capsys.readouterr().out
        consolidation, gml = blob.split("\n\n", 1)
        assert "histogram" in json.loads(consolidation)
        gml_data = json.loads(gml)
        assert gml_data["columns"][-1] == "Average"
        assert set(gml_data["rows"]) == {"Entities", "Facts", "Temporal Anchors",
                                         "Synonymy Edges"}


class TestEval:
    def test_table_output(self, tmp_path, capsys):
        dataset = write_qa_dataset(tmp_path / "qa.json")
        code = main(["eval", "--dataset", str(dataset), "--format", "qa-json",
                     "--dim", "128", "--judge", "exact"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].startswith("Category")
        assert "overall" in out

    def test_no_rpe_toggle_degrades_exact_match(self, tmp_path, capsys):
        dataset = write_qa_dataset(tmp_path / "qa.json")
        assert main(["eval", "--dataset", str(dataset), "--dim", "128",
                     "--json"]) == 0
        full = json.loads(capsys.readouterr().out)
        assert main(["eval", "--dataset", str(dataset), "--dim", "128",
                     "--json", "--toggle", "no-rpe"]) == 0
        ablated = json.loads(capsys.readouterr().out)
        assert full["overall"]["exact"] == 1.0
        assert ablated["overall"]["exact"] < full["overall"]["exact"]

    def test_csv_and_out_file(self, tmp_path):
        dataset = write_qa_dataset(tmp_path / "qa.json")
        report = tmp_path / "report.csv"
        assert main(["eval", "--dataset", str(dataset), "--dim", "128",
                     "--csv", "--out", str(report)]) == 0
        assert report.read_text(encoding="utf-8").startswith("question_id,")


class TestSnapshotCommand:
    def test_inspect(self, snapshot, capsys):
        assert main(["snapshot", "inspect", "--snapshot", str(snapshot)]) == 0
        meta = json.loads(capsys.readouterr().out)
        assert meta["format_version"] == 1
        assert meta["passages"] == 2

    def test_load_validates(self, snapshot, capsys):
        assert main(["snapshot", "load", "--snapshot", str(snapshot)]) == 0
        assert "audits passed" in capsys.readouterr().out

    def test_save_round_trips_bytes(self, snapshot, tmp_path, capsys):
        out = tmp_path / "copy.json"
        assert main(["snapshot", "save", "--snapshot", str(snapshot),
                     "--out", str(out)]) == 0
        assert out.read_bytes() == snapshot.read_bytes()

    def test_save_requires_out(self, snapshot, capsys):
        assert main(["snapshot", "save", "--snapshot", str(snapshot)]) == 1


class TestUsageErrors:
    def test_unknown_flag_exits_two(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["query", "--nonsense"])
        assert err.value.code == 2

    def test_unknown_toggle_rejected_by_argparse(self, snapshot):
        with pytest.raises(SystemExit) as err:
            main(["query", "--snapshot", str(snapshot), "--question", "x",
                  "--toggle", "no-everything"])
        assert err.value.code == 2
