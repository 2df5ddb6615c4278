import math
import random
from collections import Counter

import pytest

from depmodels.corpus import (
    BOKIDS, BOS_TW, EOKIDS, EOKIDS_TW, EOS_TW, LEFT, RIGHT, Corpus, DependencyStructure,
    Section, Sentence, TaggedWord, read_corpus,
)
from depmodels.decoder import enumerate_projective
from depmodels.estimation import SmoothingConfig, estimate, reductions
from depmodels.models import (
    NO, YES, ModelId, TrainedModel, baseline_parse, child_factor, decompose,
    distance_factor, event_counts, link_factor, parent_factor, score_structure,
    structure_events, structure_logscore, train, training_events, trigram_factor,
)

from support import SMALL_TAGS, random_corpus, random_sentence, toy_corpus_text

L01 = math.log(0.01)
ALL = [m for m in ModelId]
SCORED = [m for m in ModelId if m != ModelId.BASELINE]
EMPTY = Corpus(SMALL_TAGS, [Section("1", [Sentence(["x"], ["NN"], [2])])])


def empty_model(mid, **kw):
    m = train(mid, EMPTY, **kw)
    return TrainedModel(mid, SMALL_TAGS, {}, SmoothingConfig(), {}, m.baseline, **kw)


DOG = TaggedWord("dog", "NN")
BARKS = TaggedWord("barks", "VB")


class TestEmptyTables:
    def test_trigram(self):
        m = empty_model("X")
        assert trigram_factor(m, BOS_TW, BOS_TW, DOG) == pytest.approx(3 * L01)

    def test_child(self):
        m = empty_model("C")
        assert child_factor(m, BARKS, BOKIDS_TW(), DOG, LEFT) == pytest.approx(3 * L01)

    def test_parent_b2_adds_direction(self):
        b1, b2 = empty_model("B1"), empty_model("B2")
        v1 = parent_factor(b1, DOG, BARKS)
        assert parent_factor(b2, DOG, BARKS, RIGHT) == pytest.approx(v1 + L01)

    def test_link_and_distance(self):
        assert link_factor(empty_model("A"), DOG, BARKS, BOKIDS_TW(), NO) == \
            pytest.approx(L01)
        assert link_factor(empty_model("D", use_distance=True), DOG, BARKS,
                           BOKIDS_TW(), YES, "1") == pytest.approx(L01)
        assert distance_factor(empty_model("C_dist"), BARKS, BOKIDS_TW(), DOG, "7-inf") \
            == pytest.approx(L01)

    def test_contract_violations(self):
        with pytest.raises(ValueError):
            child_factor(empty_model("X"), BARKS, BOKIDS_TW(), DOG, LEFT)
        with pytest.raises(ValueError):
            parent_factor(empty_model("B1"), DOG, BARKS, RIGHT)
        with pytest.raises(ValueError):
            parent_factor(empty_model("B2"), DOG, BARKS)
        with pytest.raises(ValueError):
            link_factor(empty_model("D"), DOG, BARKS, BOKIDS_TW(), NO)
        with pytest.raises(ValueError):
            link_factor(empty_model("D"), DOG, BARKS, BOKIDS_TW(), YES, "1")
        with pytest.raises(ValueError):
            distance_factor(empty_model("D"), BARKS, BOKIDS_TW(), DOG, "1")
        with pytest.raises(ValueError):
            TrainedModel("C", SMALL_TAGS, {}, SmoothingConfig(), {}, None,
                         use_distance=True)


def BOKIDS_TW():
    return TaggedWord(BOKIDS, BOKIDS)


class TestLearning:
    def test_trigram_after_observation(self):
        c = Corpus(SMALL_TAGS, [Section("1", [Sentence(["the", "dog"], ["JJ", "NN"],
                                                       [2, 3])])])
        m = train("X", c)
        tw_the = TaggedWord("the", "JJ")
        assert trigram_factor(m, BOS_TW, tw_the, DOG) > 3 * L01

    def test_unseen_tag_dictionary(self):
        m = train("C", read_corpus(toy_corpus_text()))
        assert m.tag_dictionary["dog"] == {"NN"}
        assert "The" not in m.tag_dictionary


class TestTraces:
    def test_model_c_single_word(self):
        m = empty_model("C")
        d = DependencyStructure([DOG], [2])
        total, trace = score_structure(m, d)
        got = Counter((e.condition, e.outcome) for e in trace)
        expected = Counter([
            (("EOS", "EOS", BOKIDS, LEFT), DOG),
            (("EOS", "EOS", "N", LEFT), EOKIDS_TW),
            (("EOS", "EOS", BOKIDS, RIGHT), EOKIDS_TW),
            (("dog", "NN", BOKIDS, LEFT), EOKIDS_TW),
            (("dog", "NN", BOKIDS, RIGHT), EOKIDS_TW),
        ])
        assert got == expected
        assert total == pytest.approx(trace.total(), abs=1e-12)

    def test_model_x_single_word(self):
        _, trace = score_structure(empty_model("X"), DependencyStructure([DOG], [2]))
        assert [(e.condition, e.outcome) for e in trace] == [
            (("BOS", "BOS"), DOG), (("BOS", "NN"), EOS_TW)]

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_model_a_decision_count(self, n):
        m = empty_model("A")
        rng = random.Random(n)
        for _ in range(5):
            d = random_sentence(rng, n).structure()
            _, trace = score_structure(m, d)
            links = [e for e in trace if e.family == "link"]
            trig = [e for e in trace if e.family == "trigram"]
            # Each word is offered once to every other word and once to EOS.
            assert len(links) == n * n
            assert len(trig) == n + 1

    def test_model_a_scan_condition(self):
        m = empty_model("A")
        tws = [TaggedWord(w, t) for w, t in [("a", "JJ"), ("b", "NN"), ("c", "VB")]]
        d = DependencyStructure(tws, [2, 3, 4])
        _, trace = score_structure(m, d)
        eos_scan = [(e.condition[0], e.condition[4], e.outcome) for e in trace
                    if e.family == "link" and e.condition[2] == "EOS"]
        assert eos_scan == [("c", BOKIDS, YES), ("b", "V", NO), ("a", "V", NO)]

    def test_model_d_events_hand_trace(self):
        d = DependencyStructure([DOG, BARKS], [2, 3])
        evs = [e for e in training_events("D", SMALL_TAGS, d) if e.family == "link"]
        assert len(evs) == 13
        assert sum(1 for e in evs if e.condition[0] == EOKIDS and e.outcome == YES) == 6
        assert sum(1 for e in evs if e.outcome == NO) == 5
        scored = [e for e in structure_events("D", SMALL_TAGS, d) if e.family == "link"]
        assert Counter(scored) == Counter(e for e in evs if e.outcome == YES)

    def test_model_d_eokids_per_side(self):
        rng = random.Random(4)
        for _ in range(20):
            s = random_sentence(rng, rng.randint(1, 6))
            evs = training_events("D", SMALL_TAGS, s.structure())
            stops = [e for e in evs if e.condition[0] == EOKIDS and e.outcome == YES]
            assert len(stops) == 2 * (s.n + 1)

    def test_b2_direction_per_word(self):
        rng = random.Random(5)
        s = random_sentence(rng, 5)
        evs = training_events("B2", SMALL_TAGS, s.structure())
        assert sum(1 for e in evs if e.family == "parent.dir") == 5
        assert sum(1 for e in evs if e.family == "parent") == 5
        assert not any(e.family == "parent" for e in
                       training_events("B3", SMALL_TAGS, s.structure()))

    def test_factor_count_depends_on_shape_only(self):
        rng = random.Random(6)
        m = empty_model("B1")
        parents = (2, 4, 2)
        sizes = {len(score_structure(m, DependencyStructure(
            random_sentence(rng, 3).tagged_words(), parents))[1]) for _ in range(10)}
        assert len(sizes) == 1


class TestIdentities:
    @pytest.fixture()
    def trained(self):
        corpus = random_corpus(random.Random(11), sentences=30)
        return corpus, {mid: train(mid, corpus) for mid in ("B3", "C", "X")}

    def test_b3_is_c_times_x(self, trained):
        corpus, ms = trained
        rng = random.Random(12)
        for _ in range(100):
            d = random_sentence(rng, rng.randint(1, 6)).structure()
            b3 = score_structure(ms["B3"], d)[0]
            assert abs(b3 - score_structure(ms["C"], d)[0]
                       - score_structure(ms["X"], d)[0]) <= 1e-9

    @pytest.mark.parametrize("mid", [m for m in SCORED if m != ModelId.D])
    def test_train_score_multisets(self, mid):
        rng = random.Random(13)
        for _ in range(10):
            d = random_sentence(rng, rng.randint(1, 6)).structure()
            assert Counter(training_events(mid, SMALL_TAGS, d)) == \
                Counter(structure_events(mid, SMALL_TAGS, d))

    @pytest.mark.parametrize("mid", SCORED)
    def test_training_lookups_hit_top_level(self, mid):
        corpus = random_corpus(random.Random(14), sentences=10)
        m = train(mid, corpus, use_distance=mid in (ModelId.A, ModelId.D))
        for s in corpus.sentences():
            for ev in structure_events(mid, SMALL_TAGS, s.structure(), m.use_distance):
                for name, cond, _ in decompose(ev, SMALL_TAGS):
                    top = m.reduction_lists[name][0][0]
                    assert m.tables[name].condition_count(top.name, top(cond)) >= 1

    def test_trace_sums_to_score(self):
        corpus = random_corpus(random.Random(15), sentences=10)
        for mid in SCORED:
            m = train(mid, corpus)
            for s in corpus.sentences():
                total, trace = score_structure(m, s.structure())
                assert abs(total - trace.total()) <= 1e-9
                assert abs(total - structure_logscore(m, s.structure())) <= 1e-9

    def test_c_nolex_word_factor_ignores_head(self):
        corpus = random_corpus(random.Random(16), sentences=20)
        m = train("C_nolex", corpus)
        assert m.reduction_lists["child.word"] == reductions((0,))
        child = TaggedWord("a", "NN")
        vals = set()
        for head in (TaggedWord("b", "VB"), TaggedWord("c", "JJ"), EOS_TW):
            ev = ("child", (head.form, head.tag, "N", LEFT), child)
            (_, (name, cond, out), _) = decompose(ev, SMALL_TAGS)
            vals.add(estimate(m.tables[name], cond, out, m.reduction_lists[name], m.cfg))
        assert len(vals) == 1


class TestScoringContracts:
    def test_rejects_ill_formed(self):
        m = empty_model("C")
        with pytest.raises(ValueError, match="crossing"):
            score_structure(m, DependencyStructure([DOG] * 3, [3, 4, 1]))

    def test_rejects_foreign_tag(self):
        with pytest.raises(ValueError):
            score_structure(empty_model("C"),
                            DependencyStructure([TaggedWord("x", "ZZ")], [2]))

    def test_baseline_scores_zero(self):
        total, trace = score_structure(empty_model("BASELINE"),
                                       DependencyStructure([DOG], [2]))
        assert total == 0.0 and len(trace) == 0


class TestSerialization:
    @pytest.mark.parametrize("mid", ALL)
    def test_round_trip_bit_identical(self, mid):
        corpus = read_corpus(toy_corpus_text())
        kw = {"use_distance": True} if mid in (ModelId.A, ModelId.D) else {}
        m = train(mid, corpus, SmoothingConfig.thresholded(), **kw)
        again = TrainedModel.load(m.dumps())
        assert again.dumps() == m.dumps()
        for s in corpus.sentences():
            d = m.structure_for(s, s.tags, s.parents)
            assert score_structure(again, d)[0] == score_structure(m, d)[0]
        assert event_counts(again) == event_counts(m)

    def test_rejects_other_files(self):
        with pytest.raises(ValueError):
            TrainedModel.load("#depmodels-counts 1\n")


class TestBaseline:
    TEXT = (
        "#TAGSET\nDT\tD\tNounModifier\nNN\tN\tNoun\nVB\tV\tVerb\n#END\n#SECTION 1\n"
        "1\tthe\tDT\t2\n2\tdog\tNN\t3\n3\tran\tVB\t0\n\n"
        "1\ta\tDT\t2\n2\tcat\tNN\t3\n3\tsat\tVB\t0\n\n"
        "1\tthe\tDT\t2\n2\tsky\tNN\t3\n3\tfell\tVB\t0\n\n"
        "1\tyes\tVB\t0\n\n"
    )

    def test_determiner_attaches_forward(self):
        m = train("BASELINE", read_corpus(self.TEXT))
        tags, parents = baseline_parse(m, Sentence(["the", "dog", "ran"]))
        assert tags == ("DT", "NN", "VB")
        assert parents == (2, 3, 4)

    def test_clamped_to_eos(self):
        m = train("BASELINE", read_corpus(self.TEXT))
        # "dog" offsets +1; as the last word that is EOS itself.
        tags, parents = baseline_parse(m, Sentence(["ran", "the", "dog"]))
        assert parents[2] == 4

    def test_unknown_word_uses_symbol_class(self):
        text = self.TEXT + "1\tMORPH-SHORT\tNN\t2\n2\tran\tVB\t0\n\n"
        from depmodels.corpus import attenuate_training_corpus
        c = attenuate_training_corpus(read_corpus(text), protected_vocab={
            "the", "a", "dog", "cat", "sky", "ran", "sat", "fell", "yes"})
        m = train("BASELINE", c)
        tags, _ = baseline_parse(m, Sentence(["the", "zug", "ran"]))
        assert tags[1] == "NN"

    def test_root_offset_points_at_eos(self):
        m = train("BASELINE", read_corpus(self.TEXT))
        tags, parents = baseline_parse(m, Sentence(["ran", "sat"]))
        assert parents == (2, 3)
