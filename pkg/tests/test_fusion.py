import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kberel.errors import ConfigError, FormatError
from kberel.fusion import (NA, SCOPES, STRATEGIES, FusionConfig, RankedPrediction, REScoreRow,
                           composite_score, curve_auc, load_gold, load_re_scores, normalize_kbe,
                           parse_re_rows, precision_recall_curve, predict_relation, re_only_ranking,
                           rescore, write_curve_csv)
from kberel.kg import Vocab

from conftest import random_params
from oracles import naive_fusion, pr_points, trapezoid_auc

VOCAB = Vocab([f"e{i}" for i in range(6)], [f"r{j}" for j in range(4)])


def random_table(rng, rows=10, unknown=True):
    pairs = list(itertools.product(range(7 if unknown else 6), repeat=2))
    picks = rng.choice(len(pairs), size=rows, replace=False)
    table = []
    for i in picks:
        s, o = pairs[i]
        rels = [f"r{j}" for j in range(4) if rng.random() < 0.7] + (["x"] if unknown and rng.random() < 0.3 else [])
        scores = {rel: float(rng.random()) for rel in rels}
        scores[NA] = float(rng.random() * 0.6)
        table.append(REScoreRow(f"e{s}", f"e{o}", scores))
    return table


def as_tuples(preds):
    return [(p.s, p.o, p.relation, p.score) for p in preds]


class TestPredictRelation:
    def test_examples(self):
        assert predict_relation({"likes": 0.9, NA: 0.1}) == "likes"
        assert predict_relation({"likes": 0.2, NA: 0.7}) == NA
        assert predict_relation({"a": 0.5, "b": 0.5, NA: 0.1}) == "a"

    def test_empty(self):
        with pytest.raises(FormatError):
            predict_relation({})


class TestNormalize:
    def test_minmax(self):
        assert normalize_kbe([-3, -1, 1]).tolist() == [0.0, 0.5, 1.0]

    def test_sigmoid(self):
        assert normalize_kbe([0.0], "sigmoid").tolist() == [0.5]
        np.testing.assert_allclose(normalize_kbe([-800.0, 3.0], "sigmoid"), [0.0, 1 / (1 + math.exp(-3))])

    def test_constant(self):
        assert normalize_kbe([2, 2]).tolist() == [0.5, 0.5]

    def test_none(self):
        assert normalize_kbe([-4.0, 7.0], "none").tolist() == [-4.0, 7.0]

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), c=st.floats(0.01, 100), shift=st.floats(-100, 100))
    def test_minmax_affine_invariance(self, seed, c, shift):
        x = np.random.default_rng(seed).normal(size=5)
        np.testing.assert_allclose(normalize_kbe(x * c + shift), normalize_kbe(x), atol=1e-9)


class TestComposite:
    def test_identity_at_alpha_one(self):
        for strategy in STRATEGIES:
            assert composite_score(0.8, 0.3, FusionConfig(1.0, strategy)) == 0.8

    def test_weighted(self):
        assert composite_score(0.8, 0.6, FusionConfig(0.5)) == pytest.approx(0.7, abs=1e-15)
        assert composite_score(0.8, 0.6, FusionConfig(0.9)) == pytest.approx(0.78, abs=1e-15)

    def test_geometric(self):
        assert composite_score(0.8, 0.6, FusionConfig(0.5, "geometric")) == pytest.approx(0.69282, abs=1e-5)

    def test_harmonic(self):
        cfg = FusionConfig(0.5, "harmonic")
        assert composite_score(0.8, 0.6, cfg) == pytest.approx(2 / (1 / 0.8 + 1 / 0.6))
        assert composite_score(0.0, 0.6, cfg) == 0.0
        assert composite_score(0.8, 0.0, cfg) == 0.0

    def test_negative_operand(self):
        with pytest.raises(ValueError):
            composite_score(-0.1, 0.5, FusionConfig(0.5, "geometric"))

    @pytest.mark.parametrize("alpha", [0.0, 1.5, -0.2])
    def test_alpha_range(self, alpha):
        with pytest.raises(ConfigError):
            FusionConfig(alpha)

    @settings(max_examples=100, deadline=None)
    @given(alpha=st.floats(0.01, 0.99), a=st.floats(0, 1), b=st.floats(0, 1), d=st.floats(1e-3, 1))
    def test_weighted_strictly_increasing(self, alpha, a, b, d):
        cfg = FusionConfig(alpha)
        assert composite_score(a + d, b, cfg) > composite_score(a, b, cfg)
        assert composite_score(a, b + d, cfg) > composite_score(a, b, cfg)


class TestRescore:
    def test_single_row_example(self):
        # KBE scores (-1, 0.2, 1) normalise to (0, 0.6, 1): "likes" is relation 1
        vocab = Vocab(["a", "b"], ["knows", "likes", "hates"])
        params = random_params("DistMult", 2, 3, 1, np.random.default_rng(0))
        params.entity[:] = 1.0
        params.relation[:, 0] = [-1.0, 0.2, 1.0]
        table = [REScoreRow("a", "b", {"likes": 0.8, NA: 0.1})]
        preds, skipped = rescore(table, params, vocab, FusionConfig(0.9))
        assert skipped == 0
        assert preds[0].relation == "likes"
        assert preds[0].score == pytest.approx(0.78, abs=1e-12)

    def test_na_rows_dropped_and_unknown_skipped(self, rng):
        params = random_params("TransE", 6, 4, 3, rng)
        table = [REScoreRow("e0", "e1", {"r0": 0.1, NA: 0.9}), REScoreRow("zz", "e1", {"r0": 0.9, NA: 0.1})]
        preds, skipped = rescore(table, params, VOCAB, FusionConfig(0.5))
        assert preds == [] and skipped == 1

    @pytest.mark.parametrize("strategy", STRATEGIES)
    @pytest.mark.parametrize("scope", SCOPES)
    @pytest.mark.parametrize("kind", ["TransE", "ComplEx"])
    def test_alpha_one_equals_re_only(self, rng, strategy, scope, kind):
        table = random_table(rng, 25, unknown=False)
        params = random_params(kind, 6, 4, 3, rng)
        preds, _ = rescore(table, params, VOCAB, FusionConfig(1.0, strategy, scope))
        assert preds == re_only_ranking(table)

    @pytest.mark.parametrize("strategy,norm", [("weighted", "minmax"), ("weighted", "sigmoid"),
                                               ("weighted", "none"), ("geometric", "minmax"),
                                               ("harmonic", "sigmoid"), ("softmax-weighted", "minmax")])
    @pytest.mark.parametrize("scope", SCOPES)
    def test_matches_naive_reference(self, rng, strategy, norm, scope):
        for _ in range(3):
            table = random_table(rng, 10)
            params = random_params("ComplEx", 6, 4, 3, rng)
            alpha = float(rng.uniform(0.05, 0.95))
            preds, _ = rescore(table, params, VOCAB, FusionConfig(alpha, strategy, scope, norm))
            expected = naive_fusion(table, params, VOCAB, alpha, strategy, scope, norm)
            got = as_tuples(preds)
            assert [g[:3] for g in got] == [e[:3] for e in expected]
            np.testing.assert_allclose([g[3] for g in got], [e[3] for e in expected], rtol=0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_raising_kbe_never_lowers_position(self, monkeypatch, seed):
        import kberel.fusion as fusion
        rng = np.random.default_rng(seed)
        table = random_table(rng, 12, unknown=False)
        kbe = {(s, o): rng.random(4) for s in range(6) for o in range(6)}
        monkeypatch.setattr(fusion, "kbe_vector", lambda params, s, o, config: kbe[(s, o)])
        params = random_params("DistMult", 6, 4, 2, rng)
        cfg = FusionConfig(0.6)
        base, _ = rescore(table, params, VOCAB, cfg)
        for target in base:
            s, o = VOCAB.entity_id(target.s), VOCAB.entity_id(target.o)
            saved = kbe[(s, o)].copy()
            kbe[(s, o)][VOCAB.relation_id(target.relation)] += rng.uniform(0.01, 1)
            after, _ = rescore(table, params, VOCAB, cfg)
            kbe[(s, o)] = saved
            before_pos = [p.key() for p in base].index(target.key())
            after_pos = [p.key() for p in after].index(target.key())
            assert after_pos <= before_pos


class TestCurves:
    def test_all_correct(self):
        preds = [RankedPrediction("a", "b", f"r{i}", 1 - i / 10) for i in range(3)]
        gold = {p.key() for p in preds}
        assert precision_recall_curve(preds, gold) == [(1 / 3, 1.0), (2 / 3, 1.0), (1.0, 1.0)]

    def test_wrong_then_right(self):
        preds = [RankedPrediction("a", "b", "x", 0.9), RankedPrediction("a", "c", "y", 0.5)]
        assert precision_recall_curve(preds, {("a", "c", "y")}) == [(0.0, 0.0), (1.0, 0.5)]

    def test_empty_gold(self):
        with pytest.raises(ConfigError):
            precision_recall_curve([], set())

    def test_random_instance_matches_recomputation(self, rng):
        preds = [RankedPrediction(f"s{i}", f"o{i}", "r", float(rng.random())) for i in range(50)]
        preds.sort(key=lambda p: -p.score)
        gold = {p.key() for p in preds if rng.random() < 0.4} | {("s99", "o99", "r")}
        points = precision_recall_curve(preds, gold)
        assert points == pr_points([p.key() for p in preds], gold)
        recalls = [r for r, _ in points]
        assert recalls == sorted(recalls)
        assert all(0 <= p <= 1 for _, p in points)
        assert recalls[-1] == sum(p.key() in gold for p in preds) / len(gold)
        assert curve_auc(points) == pytest.approx(trapezoid_auc(points), abs=1e-12)

    def test_auc_matches_sklearn(self, rng):
        metrics = pytest.importorskip("sklearn.metrics")
        points = sorted((float(rng.random()), float(rng.random())) for _ in range(30))
        r, p = zip(*points)
        assert curve_auc(points) == pytest.approx(metrics.auc(r, p), abs=1e-12)

    def test_auc_degenerate(self):
        assert curve_auc([]) == 0.0 and curve_auc([(0.5, 1.0)]) == 0.0

    def test_csv(self, tmp_path):
        path = write_curve_csv([(0.5, 1.0), (1.0, 2 / 3)], tmp_path / "c.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "recall,precision"
        assert [tuple(map(float, ln.split(","))) for ln in lines[1:]] == [(0.5, 1.0), (1.0, 2 / 3)]


class TestFiles:
    def test_round_trip(self, tmp_path):
        rows = [{"s": "a", "o": "b", "scores": {"likes": 0.9, NA: 0.1}}]
        f = tmp_path / "re.jsonl"
        f.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        table = load_re_scores(f)
        assert table == [REScoreRow("a", "b", {"likes": 0.9, NA: 0.1})]

    @pytest.mark.parametrize("bad", ['{"s": "a", "o": "b"}', "not json",
                                     '{"s": "a", "o": "b", "scores": {"likes": 0.5}}',
                                     '{"s": "a", "o": "b", "scores": {}}',
                                     '{"s": "a", "o": "b", "scores": {"NA": "NaN"}}'])
    def test_malformed_line_number(self, bad):
        good = '{"s": "x", "o": "y", "scores": {"NA": 0.2}}'
        with pytest.raises(FormatError) as err:
            parse_re_rows([good, bad], "re.jsonl")
        assert "re.jsonl:2:" in str(err.value)

    def test_duplicate_pair(self):
        line = '{"s": "x", "o": "y", "scores": {"NA": 0.2}}'
        with pytest.raises(FormatError):
            parse_re_rows([line, line])

    def test_gold(self, tmp_path):
        f = tmp_path / "gold.tsv"
        f.write_text("a\tlikes\tb\n\nc\tknows\td\n")
        assert load_gold(f) == {("a", "b", "likes"), ("c", "d", "knows")}
        f.write_text("a\tlikes\n")
        with pytest.raises(FormatError):
            load_gold(f)
