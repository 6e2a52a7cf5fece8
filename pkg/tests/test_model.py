import numpy as np
import pytest
from hypothesis import given, strategies as st

from seem.errors import ConfigError, NotFound, ProvenanceViolation
from seem.model import (
    Passage,
    PassageStore,
    Provenance,
    QuadDraft,
    RetrievalConfig,
    SemanticRoleEvent,
    TemporalValidity,
    as_unit_vector,
    union_provenance,
)

from helpers import make_passage


class TestPassage:
    def test_rejects_blank_text(self):
        with pytest.raises(ValueError):
            make_passage("s", 0, "   ")

    def test_rejects_negative_turn(self):
        with pytest.raises(ValueError):
            Passage(passage_id="s:0", session_id="s", turn_index=-1,
                    speaker="A", text="hello")

    def test_identity_scheme(self):
        p = make_passage("sess", 3, "hello")
        assert p.passage_id == "sess:3"


class TestPassageStore:
    def test_duplicate_id_rejected(self):
        store = PassageStore()
        store.add(make_passage("s", 0, "a"))
        with pytest.raises(ValueError):
            store.add(make_passage("s", 0, "b"))

    def test_duplicate_session_turn_rejected(self):
        store = PassageStore()
        store.add(make_passage("s", 0, "a"))
        clone = Passage(passage_id="other", session_id="s", turn_index=0,
                        speaker="A", text="b")
        with pytest.raises(ValueError):
            store.add(clone)

    def test_chronology_is_insertion_order(self):
        store = PassageStore()
        store.add(make_passage("b", 0, "x"))
        store.add(make_passage("a", 0, "y"))
        store.add(make_passage("a", 1, "z"))
        assert store.ids() == ["b:0", "a:0", "a:1"]
        assert store.chronological(["a:1", "b:0"]) == ["b:0", "a:1"]

    def test_unknown_lookup(self):
        store = PassageStore()
        with pytest.raises(NotFound):
            store.get("nope")


class TestProvenance:
    def test_non_empty(self):
        with pytest.raises(ValueError):
            Provenance(frozenset())

    def test_union_requires_closure(self):
        store = PassageStore()
        store.add(make_passage("s", 0, "a"))
        a = Provenance.of("s:0")
        b = Provenance.of("s:0", "ghost")
        with pytest.raises(ProvenanceViolation):
            union_provenance(a, b, store)

    def test_union_idempotent(self):
        store = PassageStore()
        store.add(make_passage("s", 0, "a"))
        a = Provenance.of("s:0")
        assert union_provenance(a, a, store) == a

    def test_union_subset_absorption(self):
        store = PassageStore()
        store.add(make_passage("s", 0, "a"))
        store.add(make_passage("s", 1, "b"))
        big = Provenance.of("s:0", "s:1")
        small = Provenance.of("s:0")
        assert union_provenance(big, small, store) == big

    @given(
        a=st.sets(st.integers(0, 30), min_size=1),
        b=st.sets(st.integers(0, 30), min_size=1),
        c=st.sets(st.integers(0, 30), min_size=1),
    )
    def test_union_is_a_join_semilattice(self, a, b, c):
        pa = Provenance(frozenset(map(str, a)))
        pb = Provenance(frozenset(map(str, b)))
        pc = Provenance(frozenset(map(str, c)))
        assert pa.union(pa) == pa
        assert pa.union(pb) == pb.union(pa)
        assert pa.union(pb).union(pc) == pa.union(pb.union(pc))
        assert len(pa.union(pb)) >= max(len(pa), len(pb))


class TestSemanticRoleEvent:
    def test_needs_participants_or_actions(self):
        with pytest.raises(ValueError):
            SemanticRoleEvent()

    def test_absent_roles_must_be_none(self):
        with pytest.raises(ValueError):
            SemanticRoleEvent(participants=("A",), time="  ")

    def test_ok(self):
        event = SemanticRoleEvent(actions=("A waved",))
        assert event.time is None


class TestQuadDraft:
    def test_requires_subject_and_relation(self):
        with pytest.raises(ValueError):
            QuadDraft(subject="", relation="owns", object="x")
        with pytest.raises(ValueError):
            QuadDraft(subject="A", relation=" ", object="x")

    def test_serialization_uses_pipes(self):
        draft = QuadDraft(subject="Nate", relation="owns", object="them",
                          temporal=TemporalValidity(raw="since January 2019",
                                                    normalized="from 2019-01"))
        assert draft.serialized() == "Nate | owns | them | from 2019-01"

    def test_serialization_without_temporal(self):
        draft = QuadDraft(subject="Tim", relation="got_into",
                          object="study abroad program")
        assert draft.serialized() == "Tim | got_into | study abroad program | "


class TestUnitNorm:
    def test_accepts_unit(self):
        v = np.zeros(4)
        v[0] = 1.0
        assert as_unit_vector(v) is not None

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            as_unit_vector(np.ones(4))

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=16))
    def test_self_cosine_is_one(self, values):
        arr = np.asarray(values)
        norm = np.linalg.norm(arr)
        if norm < 1e-9:
            return
        unit = arr / norm
        assert abs(float(unit @ unit) - 1.0) <= 1e-6


class TestRetrievalConfig:
    def test_defaults(self):
        cfg = RetrievalConfig()
        assert cfg.initial_retrieval_size == 5
        assert cfg.expansion_cap_multiplier == 2
        assert cfg.fact_seed_k == 5
        assert cfg.damping == 0.85
        assert cfg.ppr_tolerance == 1e-8
        assert cfg.ppr_max_iters == 200
        assert cfg.merge_threshold == 0.90
        assert cfg.fusion_candidate_threshold == 0.0
        assert cfg.expansion_cap == 10

    @pytest.mark.parametrize("field,value", [
        ("initial_retrieval_size", 0),
        ("expansion_cap_multiplier", 0),
        ("fact_seed_k", 0),
        ("damping", 0.0),
        ("damping", 1.0),
        ("ppr_tolerance", 0.0),
        ("ppr_max_iters", 0),
        ("merge_threshold", 0.0),
        ("merge_threshold", 1.5),
        ("fusion_candidate_threshold", 1.0),
        ("fusion_candidates", 0),
    ])
    def test_bounds_rejected_at_construction(self, field, value):
        with pytest.raises(ConfigError):
            RetrievalConfig(**{field: value})

    def test_round_trips_through_dict(self):
        cfg = RetrievalConfig(initial_retrieval_size=7, damping=0.5)
        assert RetrievalConfig.from_dict(cfg.to_dict()) == cfg
