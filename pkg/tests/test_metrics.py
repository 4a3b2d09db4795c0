from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affectseek import jsonl, metrics
from affectseek.corpus import load_corpus, load_pairs, flatten_pairs
from affectseek.domain import EmotionLabel, TimeSpan
from affectseek.errors import (
    DuplicatePrediction,
    EmptyEvaluation,
    UnknownPairId,
    ValidationError,
)
from affectseek.metrics import Prediction, Sample


def span(a, b):
    return TimeSpan(float(a), float(b))


class TestTiou:
    # frozen spot values
    def test_partial_overlap_is_one_third(self):
        assert metrics.tiou(span(10, 20), span(15, 25)) == pytest.approx(1 / 3, abs=1e-12)

    def test_identity_is_one(self):
        assert metrics.tiou(span(3, 9), span(3, 9)) == 1.0

    def test_disjoint_is_zero(self):
        assert metrics.tiou(span(0, 5), span(7, 9)) == 0.0

    def test_touching_is_zero(self):
        assert metrics.tiou(span(0, 5), span(5, 9)) == 0.0

    def test_containment(self):
        assert metrics.tiou(span(0, 100), span(40, 50)) == pytest.approx(0.1)

    @given(st.tuples(st.floats(0, 1e4), st.floats(0, 1e4)).filter(lambda t: t[0] < t[1]),
           st.tuples(st.floats(0, 1e4), st.floats(0, 1e4)).filter(lambda t: t[0] < t[1]))
    def test_symmetric_and_bounded(self, a, b):
        x, y = span(*a), span(*b)
        v = metrics.tiou(x, y)
        assert v == metrics.tiou(y, x)
        assert 0.0 <= v <= 1.0


def random_samples(rng, n, labels=tuple(EmotionLabel), missing_rate=0.1):
    samples = []
    for _ in range(n):
        gs = rng.uniform(0, 500)
        gt = span(gs, gs + rng.uniform(1, 60))
        if rng.random() < missing_rate:
            samples.append(Sample(gt_span=gt, gt_emotion=rng.choice(labels)))
            continue
        ps = max(0.0, gs + rng.uniform(-30, 30))
        pred = span(ps, ps + rng.uniform(1, 60))
        samples.append(Sample(gt_span=gt, gt_emotion=rng.choice(labels),
                              pred_span=pred, pred_emotion=rng.choice(labels)))
    return samples


def brute_force(samples, tau):
    """Reference aggregation written independently of the library."""
    n = len(samples)
    tious = []
    rec = joint = acc = 0
    for s in samples:
        if s.pred_span is None:
            t = 0.0
        else:
            lo = max(s.gt_span.start_s, s.pred_span.start_s)
            hi = min(s.gt_span.end_s, s.pred_span.end_s)
            inter = max(0.0, hi - lo)
            union = (max(s.gt_span.end_s, s.pred_span.end_s)
                     - min(s.gt_span.start_s, s.pred_span.start_s))
            t = inter / union if inter > 0 else 0.0
        tious.append(t)
        match = s.pred_emotion is not None and s.pred_emotion == s.gt_emotion
        if t >= tau:
            rec += 1
            if match:
                joint += 1
        if match:
            acc += 1
    return sum(tious) / n, rec / n, joint / n, acc / n


class TestAggregates:
    def test_mean_tiou_hand_value(self):
        samples = [
            Sample(gt_span=span(0, 10), gt_emotion=EmotionLabel.JOY,
                   pred_span=span(0, 10), pred_emotion=EmotionLabel.JOY),
            Sample(gt_span=span(0, 10), gt_emotion=EmotionLabel.JOY,
                   pred_span=span(20, 30), pred_emotion=EmotionLabel.JOY),
        ]
        assert metrics.mean_tiou(samples) == pytest.approx(0.5)

    def test_missing_prediction_scores_zero(self):
        samples = [
            Sample(gt_span=span(0, 10), gt_emotion=EmotionLabel.JOY,
                   pred_span=span(0, 10), pred_emotion=EmotionLabel.JOY),
            Sample(gt_span=span(0, 10), gt_emotion=EmotionLabel.JOY),
        ]
        assert metrics.mean_tiou(samples) == pytest.approx(0.5)
        assert metrics.emotion_accuracy(samples) == pytest.approx(0.5)
        assert metrics.joint_at(samples, 0.5) == pytest.approx(0.5)

    def test_empty_evaluation_rejected(self):
        for fn in (metrics.mean_tiou, metrics.emotion_accuracy):
            with pytest.raises(EmptyEvaluation):
                fn([])
        with pytest.raises(EmptyEvaluation):
            metrics.recall_at_1([], 0.5)

    def test_recall_hand_table(self):
        gts = [(0, 10)] * 4
        preds = [(0, 10), (0, 5), (3, 10), (50, 60)]  # tIoU 1.0, 0.5, 0.7, 0.0
        samples = [Sample(gt_span=span(*g), gt_emotion=EmotionLabel.FEAR,
                          pred_span=span(*p), pred_emotion=EmotionLabel.FEAR)
                   for g, p in zip(gts, preds)]
        assert metrics.recall_at_1(samples, 0.3) == pytest.approx(3 / 4)
        assert metrics.recall_at_1(samples, 0.5) == pytest.approx(3 / 4)  # 0.5 >= 0.5
        assert metrics.recall_at_1(samples, 0.7) == pytest.approx(2 / 4)
        assert metrics.recall_at_1(samples, 1.0) == pytest.approx(1 / 4)

    @pytest.mark.parametrize("tau", [0.0, -0.5, 1.0001])
    def test_tau_domain(self, tau):
        s = [Sample(gt_span=span(0, 1), gt_emotion=EmotionLabel.JOY)]
        with pytest.raises(ValueError):
            metrics.recall_at_1(s, tau)

    def test_per_emotion_accuracy(self):
        samples = [
            Sample(gt_span=span(0, 1), gt_emotion=EmotionLabel.JOY,
                   pred_span=span(0, 1), pred_emotion=EmotionLabel.JOY),
            Sample(gt_span=span(0, 1), gt_emotion=EmotionLabel.JOY,
                   pred_span=span(0, 1), pred_emotion=EmotionLabel.FEAR),
            Sample(gt_span=span(0, 1), gt_emotion=EmotionLabel.FEAR,
                   pred_span=span(0, 1), pred_emotion=EmotionLabel.FEAR),
        ]
        assert metrics.per_emotion_accuracy(samples) == {"fear": 1.0, "joy": 0.5}

    def test_matches_brute_force_on_random_samples(self):
        rng = random.Random(20240817)
        samples = random_samples(rng, 400)
        for tau in (0.3, 0.5, 0.7):
            want = brute_force(samples, tau)
            assert metrics.mean_tiou(samples) == pytest.approx(want[0], abs=1e-12)
            assert metrics.recall_at_1(samples, tau) == pytest.approx(want[1], abs=1e-12)
            assert metrics.joint_at(samples, tau) == pytest.approx(want[2], abs=1e-12)
            assert metrics.emotion_accuracy(samples) == pytest.approx(want[3], abs=1e-12)

    def test_lattice_properties(self):
        rng = random.Random(7)
        samples = random_samples(rng, 300)
        acc = metrics.emotion_accuracy(samples)
        prev_recall = prev_joint = 1.0
        for tau in (0.1, 0.3, 0.5, 0.7, 0.9):
            r = metrics.recall_at_1(samples, tau)
            j = metrics.joint_at(samples, tau)
            assert j <= min(r, acc) + 1e-12
            assert r <= prev_recall + 1e-12 and j <= prev_joint + 1e-12
            prev_recall, prev_joint = r, j

    def test_permutation_invariance(self):
        rng = random.Random(3)
        samples = random_samples(rng, 50)
        shuffled = samples[:]
        rng.shuffle(shuffled)
        assert metrics.mean_tiou(samples) == pytest.approx(metrics.mean_tiou(shuffled))
        assert metrics.joint_at(samples, 0.5) == pytest.approx(metrics.joint_at(shuffled, 0.5))


class TestReportPlumbing:
    def test_evaluate_report_shape(self):
        rng = random.Random(9)
        samples = random_samples(rng, 60)
        report = metrics.evaluate_samples(samples)
        assert report.n_samples == 60
        assert set(report.recall_at) == {"0.3", "0.5", "0.7"}
        d = report.to_dict()
        assert d["thresholds"] == [0.3, 0.5, 0.7]
        assert 0.0 <= d["mIoU"] <= 1.0

    def test_prediction_parsing_variants(self):
        full = metrics.prediction_from_dict({
            "pair_id": "p1", "pred_start_s": 1.0, "pred_end_s": 2.0,
            "pred_emotion": "Angry", "pred_rationale": "r", "flags": ["low_confidence"]})
        assert full.emotion is EmotionLabel.ANGER
        assert full.flags == ("low_confidence",)
        bare = metrics.prediction_from_dict({"pair_id": "p2", "flags": ["budget_exhausted"]})
        assert bare.span is None and bare.emotion is None

    @pytest.mark.parametrize("row", [
        {"pred_start_s": 1.0},                                     # no pair_id
        {"pair_id": "p", "pred_start_s": 5.0, "pred_end_s": 2.0,
         "pred_emotion": "joy"},                                   # inverted span
        {"pair_id": "p", "pred_start_s": 1.0, "pred_end_s": 2.0},  # missing emotion
        {"pair_id": "p", "flags": "notalist"},
    ])
    def test_bad_prediction_rows(self, row):
        with pytest.raises(ValidationError):
            metrics.prediction_from_dict(row)

    def test_duplicate_prediction_rejected(self, tmp_path):
        row = {"pair_id": "p", "pred_start_s": 1.0, "pred_end_s": 2.0,
               "pred_emotion": "joy", "pred_rationale": "r"}
        path = tmp_path / "pred.jsonl"
        jsonl.write_lines(path, [row, row])
        with pytest.raises(DuplicatePrediction):
            metrics.load_predictions(path)

    def test_unknown_pair_id_rejected(self, oracle_corpus_path):
        pairs = flatten_pairs(load_corpus(oracle_corpus_path))
        preds = {"nope": Prediction(pair_id="nope", span=span(0, 1),
                                    emotion=EmotionLabel.JOY)}
        with pytest.raises(UnknownPairId):
            metrics.match_predictions(pairs, preds)

    def test_missing_predictions_become_zero_samples(self, oracle_corpus_path):
        pairs = flatten_pairs(load_corpus(oracle_corpus_path))
        one = pairs[0]
        preds = {one.pair_id: Prediction(pair_id=one.pair_id, span=one.gt_span,
                                         emotion=one.gt_emotion)}
        report = metrics.evaluate_run(pairs, preds)
        assert report.n_missing == len(pairs) - 1
        assert report.miou == pytest.approx(1.0 / len(pairs))

    def test_perfect_run_on_oracle_pairs(self, oracle_pairs_path):
        pairs = load_pairs(oracle_pairs_path)
        preds = {p.pair_id: Prediction(pair_id=p.pair_id, span=p.gt_span,
                                       emotion=p.gt_emotion, rationale=p.gt_rationale)
                 for p in pairs}
        report = metrics.evaluate_run(pairs, preds)
        assert report.miou == 1.0
        assert report.joint_at["0.7"] == 1.0
        assert report.accuracy == 1.0

    def test_render_table(self):
        rng = random.Random(2)
        report = metrics.evaluate_samples(random_samples(rng, 40))
        text = metrics.render_table(report, score=9.5)
        assert "mIoU" in text and "Joint@0.7" in text and "9.50" in text
        no_score = metrics.render_table(report)
        assert no_score.rstrip().endswith("-") or "-" in no_score.splitlines()[1]
