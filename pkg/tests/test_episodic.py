import numpy as np
import pytest

from seem.episodic import EpisodicStore
from seem.errors import DimensionError, ExtractionFailure, FusionFailure, JudgeFailure, NotFound
from seem.gateway import MockGateway
from seem.model import PassageStore

from helpers import make_passage


class FailingGateway(MockGateway):
    """Mock variant that fails extraction on marked passages."""

    MARKER = "[corrupt]"

    def extract_frame(self, passage):
        if self.MARKER in passage.text:
            raise ExtractionFailure("marked for failure")
        return super().extract_frame(passage)


def fresh_store(gateway=None):
    gateway = gateway or MockGateway(dim=64, seed=0)
    passages = PassageStore()
    return EpisodicStore(gateway, passages), passages


def ingest(store, passages, *rows):
    ids = []
    for row in rows:
        p = make_passage(*row)
        passages.add(p)
        ids.append(store.ingest_passage(p))
    return ids


class TestIngestion:
    def test_first_passage_creates_frame_without_judge(self):
        calls = []

        class CountingGateway(MockGateway):
            def judge_same_event(self, candidate, previous):
                calls.append((candidate.frame_id, previous.frame_id))
                return super().judge_same_event(candidate, previous)

        store, passages = fresh_store(CountingGateway(dim=64, seed=0))
        [fid] = ingest(store, passages, ("s", 0, "Rob waved on May 1, 2020."))
        assert fid == "0"
        assert calls == []  # empty candidate set, no judge call
        assert store.frames[fid].provenance.sorted_ids() == ["s:0"]

    def test_inquiry_then_response_fuse_into_one_frame(self):
        store, passages = fresh_store()
        ids = ingest(
            store, passages,
            ("s", 0, "Joanna asked Nate about them.", "Joanna", "2022-01-23T14:01:00"),
            ("s", 1, "Nate said he adored them, Joanna.", "Nate", "2022-01-23T14:02:00"),
        )
        assert ids[0] == ids[1] == "0"
        frame = store.frames["0"]
        assert frame.provenance.sorted_ids() == ["s:0", "s:1"]
        assert len(frame.events) == 2
        assert store.tombstones == ["1"]
        assert len(store.frames) == 1

    def test_fused_frame_reembeds_new_summary(self):
        store, passages = fresh_store()
        ingest(store, passages,
               ("s", 0, "Joanna asked Nate about them.", "Joanna", "2022-01-23T14:01:00"))
        before = store.frames["0"].summary_embedding.copy()
        ingest(store, passages,
               ("s", 1, "Nate said he adored them, Joanna.", "Nate", "2022-01-23T14:02:00"))
        after = store.frames["0"].summary_embedding
        expected = store.gateway.embed(store.frames["0"].summary)
        assert np.array_equal(after, expected)
        assert np.array_equal(before, after)  # mock keeps the older summary

    def test_double_ingest_rejected(self):
        store, passages = fresh_store()
        ingest(store, passages, ("s", 0, "Rob waved."))
        with pytest.raises(ValueError):
            store.ingest_passage(passages.get("s:0"))

    def test_unstored_passage_rejected(self):
        store, _ = fresh_store()
        with pytest.raises(NotFound):
            store.ingest_passage(make_passage("x", 0, "loose"))

    def test_extraction_failure_quarantines(self):
        store, passages = fresh_store(FailingGateway(dim=64, seed=0))
        ids = ingest(store, passages,
                     ("s", 0, "good turn about Rob."),
                     ("s", 1, "bad [corrupt] turn."))
        assert ids == ["0", None]
        assert store.is_quarantined("s:1")
        assert store.frames_for_passage("s:1") == set()
        store.audit()

    def test_judge_failure_treated_as_distinct(self):
        class BrokenJudge(MockGateway):
            def judge_same_event(self, candidate, previous):
                raise JudgeFailure("judge offline")

        store, passages = fresh_store(BrokenJudge(dim=64, seed=0))
        ingest(store, passages,
               ("s", 0, "Rob waved on May 1, 2020."),
               ("s", 1, "Rob left on May 1, 2020."))
        assert len(store.frames) == 2

    def test_fusion_failure_keeps_both_frames(self):
        class BrokenFuser(MockGateway):
            def fuse_frames(self, candidate, previous, sources):
                raise FusionFailure("fuser offline")

        store, passages = fresh_store(BrokenFuser(dim=64, seed=0))
        ingest(store, passages,
               ("s", 0, "Rob waved on May 1, 2020."),
               ("s", 1, "Rob left on May 1, 2020."))
        assert len(store.frames) == 2
        store.audit()


class ScriptedGateway(MockGateway):
    """Pins embeddings per summary text and scripts the judge verdicts."""

    def __init__(self, vectors: dict, same_event_pairs: set, dim: int = 4):
        super().__init__(dim=dim, seed=0)
        self.vectors = vectors
        self.same_event_pairs = same_event_pairs
        self.judge_calls = 0

    def embed(self, text):
        if text in self.vectors:
            vec = np.zeros(self.embedding_dim)
            for index, value in self.vectors[text]:
                vec[index] = value
            return vec / np.linalg.norm(vec)
        return super().embed(text)

    def judge_same_event(self, candidate, previous):
        self.judge_calls += 1
        return frozenset((candidate.summary, previous.summary)) in self.same_event_pairs


class TestCandidateSelection:
    # unit vectors with cos(c, a) ~ 0.9 and cos(c, b) ~ 0.5
    VECTORS = {
        "frame a": [(0, 1.0)],
        "frame b": [(1, 1.0)],
        "candidate": [(0, 0.9), (1, 0.436)],
    }

    def build(self, candidate_count=1, candidate_threshold=0.0, pairs=frozenset()):
        gateway = ScriptedGateway(self.VECTORS, pairs)
        passages = PassageStore()
        store = EpisodicStore(gateway, passages, candidate_count=candidate_count,
                              candidate_threshold=candidate_threshold)
        ingest(store, passages, ("s", 0, "frame a"), ("s", 1, "frame b"))
        return gateway, store, passages

    def test_threshold_short_circuits_the_judge(self):
        # every candidate similarity sits below 0.95, so the judge never runs
        gateway, store, passages = self.build(candidate_threshold=0.95)
        ingest(store, passages, ("s", 2, "candidate"))
        assert gateway.judge_calls == 0
        assert len(store.frames) == 3

    def test_default_consults_judge_on_top_candidate(self):
        pairs = {frozenset(("candidate", "frame a"))}
        gateway, store, passages = self.build(pairs=pairs)
        ingest(store, passages, ("s", 2, "candidate"))
        assert len(store.frames) == 2
        fused = store.frames["0"]
        assert fused.provenance.sorted_ids() == ["s:0", "s:2"]

    def test_wider_candidate_set_reaches_second_best(self):
        pairs = {frozenset(("candidate", "frame b"))}
        gateway, store, passages = self.build(candidate_count=2, pairs=pairs)
        ingest(store, passages, ("s", 2, "candidate"))
        assert store.frames["1"].provenance.sorted_ids() == ["s:1", "s:2"]

    def test_top1_only_misses_second_best(self):
        pairs = {frozenset(("candidate", "frame b"))}
        gateway, store, passages = self.build(candidate_count=1, pairs=pairs)
        ingest(store, passages, ("s", 2, "candidate"))
        assert len(store.frames) == 3  # judge saw only the nearest frame


class TestNearestFrame:
    def test_singleton_argmax(self, gateway):
        store, passages = fresh_store(gateway)
        ingest(store, passages, ("s", 0, "Rob waved at dawn."))
        vec = gateway.embed("Rob waved at dawn.")
        hit = store.nearest_frame(vec)
        assert hit is not None
        frame_id, score = hit
        assert frame_id == "0"
        assert score == pytest.approx(
            float(vec @ store.frames["0"].summary_embedding), abs=1e-12)

    def test_empty_store_returns_none(self, gateway):
        store, _ = fresh_store(gateway)
        assert store.nearest_frame(gateway.embed("anything")) is None

    def test_exact_duplicate_embeddings_tie_break_to_lowest_seq(self, gateway):
        store, passages = fresh_store(gateway)
        # same text in different sessions on different days: no fusion (day
        # check fails via differing timestamps), identical embeddings
        ingest(store, passages,
               ("a", 0, "Rob waved politely.", "X", "2020-05-01T10:00:00"),
               ("b", 0, "Rob waved politely.", "X", "2021-06-02T10:00:00"))
        assert len(store.frames) == 2
        vec = gateway.embed("Rob waved politely.")
        scores = {fid: float(vec @ f.summary_embedding) for fid, f in store.frames.items()}
        assert scores["0"] == scores["1"]
        # brute-force scan oracle: lowest created_seq among the maxima
        best = min((fid for fid in scores if scores[fid] == max(scores.values())),
                   key=lambda fid: store.frames[fid].created_seq)
        assert store.nearest_frame(vec)[0] == best == "0"

    def test_dimension_mismatch(self, gateway):
        store, passages = fresh_store(gateway)
        ingest(store, passages, ("s", 0, "Rob waved."))
        wrong = np.zeros(32)
        wrong[0] = 1.0
        with pytest.raises(DimensionError):
            store.nearest_frame(wrong)


class TestFramesForPassage:
    def test_direct_mapping(self, gateway):
        store, passages = fresh_store(gateway)
        ingest(store, passages, ("s", 0, "Rob waved."))
        frames = store.frames_for_passage("s:0")
        assert {f.frame_id for f in frames} == {"0"}

    def test_unknown_passage_raises(self, gateway):
        store, _ = fresh_store(gateway)
        with pytest.raises(NotFound):
            store.frames_for_passage("ghost:0")

    def test_after_refusion_points_at_current_frame_only(self, gateway):
        store, passages = fresh_store(gateway)
        ingest(store, passages,
               ("s", 0, "Rob planned the trip on May 1, 2020.", "Rob"),
               ("s", 1, "Rob packed his bag on May 1, 2020.", "Rob"),
               ("s", 2, "Rob departed happily on May 1, 2020.", "Rob"))
        # replay by hand: each later passage fuses into frame "0"
        assert len(store.frames) == 1
        for pid in ("s:0", "s:1", "s:2"):
            frames = store.frames_for_passage(pid)
            assert {f.frame_id for f in frames} == {"0"}
        assert store.frames["0"].provenance.sorted_ids() == ["s:0", "s:1", "s:2"]


class TestConsolidationStats:
    def test_empty_store_reports_null_ratio(self, gateway):
        store, _ = fresh_store(gateway)
        stats = store.consolidation_stats()
        assert stats.histogram == {}
        assert stats.total_frames == 0
        assert stats.total_passages == 0
        assert stats.ratio is None

    def test_three_passages_one_fusion(self, gateway):
        store, passages = fresh_store(gateway)
        ingest(store, passages,
               ("s", 0, "Rob waved on May 1, 2020."),
               ("s", 1, "Rob left on May 1, 2020."),
               ("t", 0, "Zelda sang on June 2, 2021."))
        stats = store.consolidation_stats()
        assert stats.histogram == {1: 1, 2: 1}
        assert stats.total_frames == 2
        assert stats.total_passages == 3
        assert stats.ratio == pytest.approx(1.5)

    def test_histogram_mass_equals_non_quarantined_passages(self):
        store, passages = fresh_store(FailingGateway(dim=64, seed=0))
        ingest(store, passages,
               ("s", 0, "Rob waved on May 1, 2020."),
               ("s", 1, "broken [corrupt] row."),
               ("s", 2, "Zelda sang on June 2, 2021."))
        stats = store.consolidation_stats()
        covered = sum(size * count for size, count in stats.histogram.items())
        assert covered == stats.total_passages == 2
        assert stats.quarantined == 1


class TestInvariants:
    def test_replay_determinism(self):
        rows = [
            ("s", 0, "Rob waved on May 1, 2020."),
            ("s", 1, "Rob left on May 1, 2020."),
            ("t", 0, "Zelda sang on June 2, 2021."),
            ("t", 1, "Zelda bowed on June 2, 2021."),
        ]

        def run():
            store, passages = fresh_store(MockGateway(dim=64, seed=0))
            ingest(store, passages, *rows)
            return {
                fid: (f.summary, f.events, f.provenance.sorted_ids(),
                      f.summary_embedding.tobytes())
                for fid, f in store.frames.items()
            }

        assert run() == run()

    def test_frame_count_bounded_by_passages(self, gateway):
        store, passages = fresh_store(gateway)
        rows = [("s", i, f"Solo{i} acted on May {i + 1}, 2020.") for i in range(6)]
        for row in rows:
            ingest(store, passages, row)
            assert len(store.frames) <= len(store.ingested_passages())

    def test_provenance_union_covers_all_non_quarantined(self, gateway):
        store, passages = fresh_store(gateway)
        ingest(store, passages,
               ("s", 0, "Rob waved on May 1, 2020."),
               ("s", 1, "Rob left on May 1, 2020."),
               ("t", 0, "Zelda sang on June 2, 2021."))
        covered = set()
        for frame in store.frames.values():
            covered |= frame.provenance.passage_ids
        assert covered == {"s:0", "s:1", "t:0"}
        store.audit()
