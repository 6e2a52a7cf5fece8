import logging

import pytest

from seem.build import Memory, build, snapshot_text
from seem.errors import BuildAborted, ExtractionFailure, LoadError
from seem.gateway import MockGateway
from seem.ingest import SessionRecord, TranscriptDocument, TurnRecord
from seem.synthetic import fusion_corpus, qa_corpus


class FailingGateway(MockGateway):
    MARKER = "[corrupt]"

    def extract_frame(self, passage):
        if self.MARKER in passage.text:
            raise ExtractionFailure("marked for failure")
        return super().extract_frame(passage)


def small_document() -> TranscriptDocument:
    return qa_corpus(num_questions=8, seed=3).document


def snapshot_bytes(memory: Memory) -> str:
    return snapshot_text(memory.to_snapshot_dict())


class TestBatchVsIncremental:
    def test_byte_identical_snapshots(self, tmp_path):
        document = small_document()
        batch = build(document, MockGateway(dim=64, seed=0), mode="batch")
        incremental = build(document, MockGateway(dim=64, seed=0),
                            mode="incremental", segments=4,
                            out_path=tmp_path / "inc.json")
        assert snapshot_bytes(batch) == snapshot_bytes(incremental)
        assert (tmp_path / "inc.json").read_text(encoding="utf-8") == snapshot_bytes(batch)

    def test_segment_boundaries_cover_all_passages(self):
        document = small_document()
        memory = build(document, MockGateway(dim=64, seed=0),
                       mode="incremental", segments=4)
        assert memory.ingest_cursor == len(document.to_passages())

    def test_invalid_mode_and_segments(self):
        document = small_document()
        with pytest.raises(ValueError):
            build(document, MockGateway(), mode="stream")
        with pytest.raises(ValueError):
            build(document, MockGateway(), mode="incremental", segments=0)


class TestRestartSafety:
    def test_resume_from_partial_snapshot_matches_uninterrupted_run(self, tmp_path):
        document = small_document()
        passages = document.to_passages()
        uninterrupted = build(document, MockGateway(dim=64, seed=0))
        target = tmp_path / "resumable.json"

        # simulate a kill after two of four segments: ingest exactly half,
        # persist, then resume through the public entry point
        partial = Memory(MockGateway(dim=64, seed=0),
                         conversation_id=document.conversation_id)
        for passage in passages[: len(passages) // 2]:
            partial.ingest_passage(passage)
        partial.save(target)

        resumed = build(document, MockGateway(dim=64, seed=0), mode="incremental",
                        segments=4, out_path=target, resume=True)
        assert snapshot_bytes(resumed) == snapshot_bytes(uninterrupted)

    def test_resume_rejects_foreign_snapshot(self, tmp_path):
        document = small_document()
        other = qa_corpus(num_questions=3, seed=99).document
        target = tmp_path / "other.json"
        build(other, MockGateway(dim=64, seed=0), out_path=target)
        with pytest.raises(LoadError):
            build(document, MockGateway(dim=64, seed=0), out_path=target, resume=True)


class TestQuarantineTolerance:
    def corrupted_document(self, bad: int, good: int) -> TranscriptDocument:
        sessions = []
        for i in range(bad + good):
            marker = FailingGateway.MARKER if i < bad else ""
            sessions.append(SessionRecord(
                session_id=f"s{i}", timestamp_text="2024-01-01T10:00:00",
                turns=(TurnRecord(speaker="A", text=f"row {i} {marker}".strip()),),
            ))
        return TranscriptDocument(conversation_id="corrupted", sessions=tuple(sessions))

    def test_abort_beyond_tolerance_keeps_partial_snapshot(self, tmp_path):
        document = self.corrupted_document(bad=3, good=17)
        target = tmp_path / "partial.json"
        with pytest.raises(BuildAborted) as err:
            build(document, FailingGateway(dim=64, seed=0), out_path=target,
                  quarantine_tolerance=0.10)
        assert err.value.partial_path == str(target)
        assert target.exists()
        partial = Memory.load(target, FailingGateway(dim=64, seed=0))
        assert len(partial.episodic.quarantined) == 3

    def test_within_tolerance_completes(self):
        document = self.corrupted_document(bad=1, good=19)
        memory = build(document, FailingGateway(dim=64, seed=0),
                       quarantine_tolerance=0.10)
        assert len(memory.episodic.quarantined) == 1
        assert len(memory.passages) == 20
        memory.audit()


class TestSnapshotRoundTrip:
    def test_load_save_is_byte_identity(self, tmp_path):
        memory = build(small_document(), MockGateway(dim=64, seed=0))
        path = tmp_path / "snap.json"
        memory.save(path)
        loaded = Memory.load(path, MockGateway(dim=64, seed=0))
        path2 = tmp_path / "snap2.json"
        loaded.save(path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_round_trip_preserves_behavior(self, tmp_path):
        from seem.evaluation import answer
        corpus = qa_corpus(num_questions=6, seed=3)
        memory = build(corpus.document, MockGateway(dim=128, seed=0))
        path = tmp_path / "snap.json"
        memory.save(path)
        loaded = Memory.load(path, MockGateway(dim=128, seed=0))
        loaded.audit()
        for item in corpus.questions[:3]:
            got, _ = answer(loaded.retriever(), item.query)
            want, _ = answer(memory.retriever(), item.query)
            assert got == want

    def test_round_trip_on_fusion_corpus(self, tmp_path):
        memory = build(fusion_corpus(chain_lengths=(3, 2, 1, 1)),
                       MockGateway(dim=64, seed=0))
        path = tmp_path / "snap.json"
        memory.save(path)
        loaded = Memory.load(path, MockGateway(dim=64, seed=0))
        loaded.save(tmp_path / "snap2.json")
        assert path.read_bytes() == (tmp_path / "snap2.json").read_bytes()

    def test_version_mismatch_rejected(self, tmp_path):
        memory = build(small_document(), MockGateway(dim=64, seed=0))
        path = tmp_path / "snap.json"
        data = memory.to_snapshot_dict()
        data["format_version"] = 999
        path.write_text(snapshot_text(data), encoding="utf-8")
        with pytest.raises(LoadError):
            Memory.load(path, MockGateway(dim=64, seed=0))

    def test_dim_mismatch_rejected(self, tmp_path):
        memory = build(small_document(), MockGateway(dim=64, seed=0))
        path = tmp_path / "snap.json"
        memory.save(path)
        with pytest.raises(LoadError):
            Memory.load(path, MockGateway(dim=32, seed=0))

    def test_fingerprint_mismatch_warns_but_loads(self, tmp_path, caplog):
        memory = build(small_document(), MockGateway(dim=64, seed=0))
        path = tmp_path / "snap.json"
        memory.save(path)
        with caplog.at_level(logging.WARNING):
            loaded = Memory.load(path, MockGateway(dim=64, seed=1))
        assert loaded is not None
        assert any("snapshot was built by" in r.message for r in caplog.records)


class TestDeterminism:
    def test_identical_inputs_yield_identical_snapshots(self):
        document = small_document()
        a = build(document, MockGateway(dim=64, seed=0))
        b = build(document, MockGateway(dim=64, seed=0))
        assert snapshot_bytes(a) == snapshot_bytes(b)

    def test_different_seed_changes_embeddings_only_deterministically(self):
        document = small_document()
        a = build(document, MockGateway(dim=64, seed=1))
        b = build(document, MockGateway(dim=64, seed=1))
        assert snapshot_bytes(a) == snapshot_bytes(b)
