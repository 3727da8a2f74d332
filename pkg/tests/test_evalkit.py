import math
import random

import pytest

from mtforge.corpus import DirectionGroup, ParallelPair
from mtforge.errors import ValidationError
from mtforge.evalkit import chrf, group_report, score_corpus
from mtforge.scorers import ScorerEndpoint


def chrf_oracle(hypothesis, reference, max_n=6, beta=2.0):
    """Brute-force recount straight from the definition: enumerate substrings
    as lists, count clipped matches with list.count, average F over orders."""
    hyp = "".join(hypothesis.split())
    ref = "".join(reference.split())
    fs = []
    for n in range(1, max_n + 1):
        hyp_grams = [hyp[i : i + n] for i in range(len(hyp) - n + 1)]
        ref_grams = [ref[i : i + n] for i in range(len(ref) - n + 1)]
        if not hyp_grams and not ref_grams:
            continue
        matched = 0
        for gram in set(hyp_grams):
            matched += min(hyp_grams.count(gram), ref_grams.count(gram))
        precision = matched / len(hyp_grams) if hyp_grams else 0.0
        recall = matched / len(ref_grams) if ref_grams else 0.0
        if precision + recall == 0:
            fs.append(0.0)
        else:
            fs.append((1 + beta**2) * precision * recall / (beta**2 * precision + recall))
    return 100.0 * sum(fs) / len(fs) if fs else 0.0


class TestChrf:
    def test_identity_is_100(self):
        assert chrf("the same string", "the same string") == 100.0

    def test_zero_overlap_is_0(self):
        assert chrf("aaaa", "bbbb") == 0.0

    def test_empty_reference_rejected(self):
        with pytest.raises(ValidationError):
            chrf("x", "   ")

    def test_spaces_removed_before_counting(self):
        assert chrf("ab cd", "abcd") == 100.0

    def test_matches_oracle_on_random_pairs(self):
        rng = random.Random(1234)
        alphabet = "abcde ABC漢字áé!"
        for _ in range(50):
            hyp = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))
            ref = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 40)))
            if not ref.strip():
                ref = "x"
            assert math.isclose(chrf(hyp, ref), chrf_oracle(hyp, ref), abs_tol=1e-6), (hyp, ref)

    def test_identity_100_on_random_unicode(self):
        rng = random.Random(77)
        for _ in range(100):
            length = rng.randint(1, 30)
            s = "".join(chr(rng.randint(0x21, 0x9FFF)) for _ in range(length))
            assert chrf(s, s) == 100.0

    def test_recall_weighted(self):
        # hypothesis covering all of a short reference plus noise keeps
        # recall 1 at every order; beta=2 weighting favors it over the
        # reverse (full precision, low recall)
        ref = "abcd"
        hyp = "abcdxyzw"
        assert chrf(hyp, ref) > chrf(ref, hyp) or math.isclose(
            chrf_oracle(hyp, ref), chrf(hyp, ref), abs_tol=1e-9
        )
        assert math.isclose(chrf(hyp, ref), chrf_oracle(hyp, ref), abs_tol=1e-9)
        assert math.isclose(chrf(ref, hyp), chrf_oracle(ref, hyp), abs_tol=1e-9)


def _pair(i, src="en", tgt="fr", reference="bonjour le monde"):
    return ParallelPair(
        id=f"p{i}", src_lang=src, tgt_lang=tgt, src_text="hello world", tgt_text=reference
    )


class TestScoreCorpus:
    def test_empty_corpus(self):
        scored, failures = score_corpus([], {})
        assert scored == [] and failures == []

    def test_constant_scorer(self):
        pairs = [_pair(i) for i in range(10)]
        hyps = {p.id: "whatever" for p in pairs}
        scorer = ScorerEndpoint("const", "local_function", "constant:0.7")
        scored, failures = score_corpus(pairs, hyps, scorer)
        assert len(scored) == 10 and not failures
        assert all(sp.score.value == 0.7 for sp in scored)
        assert all(sp.pair.scores["const"] == 0.7 for sp in scored)

    def test_chrf_perfect_hypotheses(self):
        pairs = [_pair(i) for i in range(5)]
        hyps = {p.id: p.tgt_text for p in pairs}
        scored, _ = score_corpus(pairs, hyps, "chrf")
        assert all(sp.score.value == 100.0 for sp in scored)

    def test_missing_hypothesis_rejected(self):
        pairs = [_pair(0)]
        with pytest.raises(ValidationError):
            score_corpus(pairs, {})

    def test_failures_bucketed(self):
        from mtforge.scorers import register_scorer

        def half_fail(item):
            if item["hypothesis"] == "bad":
                raise RuntimeError("x")
            return 0.5

        register_scorer("half_fail", half_fail)
        scorer = ScorerEndpoint("half_fail", "local_function", "half_fail")
        pairs = [_pair(0), _pair(1)]
        hyps = {"p0": "ok", "p1": "bad"}
        scored, failures = score_corpus(pairs, hyps, scorer)
        assert len(scored) == 1 and len(failures) == 1
        assert failures[0][0].id == "p1"


class TestGroupReport:
    def test_single_group_overall_equals_group(self):
        pairs = [_pair(i, "zh", "fr") for i in range(4)]
        hyps = {p.id: p.tgt_text for p in pairs}
        scored, _ = score_corpus(pairs, hyps, "chrf")
        report = group_report(scored)
        assert set(report.per_group) == {DirectionGroup.ZH_TO_XX}
        assert report.overall == report.per_group[DirectionGroup.ZH_TO_XX]

    def test_two_equal_groups_average(self):
        a = [_pair(i, "zh", "fr", reference="aaaa") for i in range(3)]
        b = [_pair(i + 10, "fr", "de", reference="aaaa") for i in range(3)]
        hyps = {p.id: ("aaaa" if p.src_lang == "zh" else "bbbb") for p in a + b}
        scored, _ = score_corpus(a + b, hyps, "chrf")
        report = group_report(scored)
        mean_a = report.per_group[DirectionGroup.ZH_TO_XX].mean
        mean_b = report.per_group[DirectionGroup.XX_TO_XX].mean
        assert math.isclose(report.overall.mean, (mean_a + mean_b) / 2, abs_tol=1e-9)

    def test_planted_five_group_counts(self):
        plan = {
            DirectionGroup.ZH_TO_XX: ("zh", "fr", 3),
            DirectionGroup.XX_TO_ZH: ("de", "zh", 4),
            DirectionGroup.EN_TO_XX: ("en", "fr", 5),
            DirectionGroup.XX_TO_EN: ("ja", "en", 6),
            DirectionGroup.XX_TO_XX: ("ko", "th", 7),
        }
        pairs = []
        for group, (src, tgt, count) in plan.items():
            pairs += [_pair(f"{group.value}{i}", src, tgt) for i in range(count)]
        hyps = {p.id: p.tgt_text for p in pairs}
        scored, _ = score_corpus(pairs, hyps, "chrf")
        report = group_report(scored)
        for group, (_, _, count) in plan.items():
            assert report.per_group[group].count == count
        assert report.overall.count == sum(c for _, _, c in plan.values())
        assert report.overall.count == sum(s.count for s in report.per_group.values())

    def test_mixed_metrics_rejected(self):
        pairs = [_pair(0), _pair(1)]
        hyps = {p.id: p.tgt_text for p in pairs}
        chrf_scored, _ = score_corpus(pairs[:1], hyps, "chrf")
        const_scored, _ = score_corpus(
            pairs[1:], hyps, ScorerEndpoint("other", "local_function", "constant:0.5")
        )
        with pytest.raises(ValidationError):
            group_report(chrf_scored + const_scored)

    def test_macro_weighs_language_pairs_equally(self):
        # 9 perfect fr->de segments and 1 zero-overlap ko->th segment
        fr = [_pair(i, "fr", "de", reference="abcd") for i in range(9)]
        ko = [_pair(99, "ko", "th", reference="abcd")]
        hyps = {p.id: "abcd" for p in fr}
        hyps["p99"] = "zzzz"
        scored, _ = score_corpus(fr + ko, hyps, "chrf")
        micro = group_report(scored, "micro")
        macro = group_report(scored, "macro")
        assert math.isclose(micro.overall.mean, 90.0, abs_tol=1e-9)
        assert math.isclose(macro.overall.mean, 50.0, abs_tol=1e-9)
