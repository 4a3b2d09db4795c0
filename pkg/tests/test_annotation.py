from __future__ import annotations

import json
import random
import threading

import pytest

from affectseek.annotation import (
    EVIDENCE_SOURCES,
    AcceptedRationale,
    ReviewItem,
    ReviewQueue,
    ReviewStatus,
    Stage1Clip,
    VerificationOutcome,
    annotate_clip,
    annotate_stage,
    apply_correction,
    build_queries,
    dual_path_verify,
    generate_local_cot,
    load_stage1,
    make_verifier,
    review_item_from_dict,
    review_item_to_dict,
    sources_in,
)
from affectseek.backends.base import BackendResponse, Task
from affectseek.backends.scripted import FailureInjectionBackend, ScriptedBackend
from affectseek.domain import EmotionLabel, MediaRef, TimeSpan
from affectseek.errors import (
    ItemNotPending,
    MalformedModelOutput,
    NotFound,
    QueryGenerationFailed,
    TransportError,
    UnknownEmotion,
    ValidationError,
)

MEDIA = MediaRef(video_id="vid", uri="file:///vid.mp4", duration_s=60.0)
SPAN = TimeSpan(8.0, 20.0)
GOLD = EmotionLabel.ANGER

GOOD_TEXT = ("visual_style: hard shadows; visual_semantics: a slammed door; "
             "vocal_prosody: raised voices; cinematic_language: tight framing")
PARTIAL_TEXT = "vocal_prosody only: someone is shouting"
SOURCELESS = "something bad happens and it feels intense"


def cot(text):
    return {"text": text}


def emo(label):
    return {"emotion": label}


def clock_at(value=123.0):
    return lambda: value


class TestSourcesIn:
    def test_all_four_found(self):
        assert sources_in(GOOD_TEXT) == EVIDENCE_SOURCES

    def test_case_insensitive_and_ordered(self):
        text = "CINEMATIC_LANGUAGE then Visual_Style"
        assert sources_in(text) == ("visual_style", "cinematic_language")

    def test_none_found(self):
        assert sources_in(SOURCELESS) == ()


class TestGenerateLocalCot:
    def test_good_first_draft(self):
        backend = ScriptedBackend({("vid", "cot_generate", "8-20"): cot(GOOD_TEXT)})
        draft = generate_local_cot(backend, MEDIA, SPAN, GOLD, "c1")
        assert draft.text == GOOD_TEXT
        assert draft.sources_present == EVIDENCE_SOURCES
        assert draft.round == 1

    def test_sourceless_draft_regenerated_once(self):
        backend = ScriptedBackend({
            ("vid", "cot_generate", "8-20"): cot(SOURCELESS),
            ("vid", "cot_generate", "8-20#a2"): cot(PARTIAL_TEXT),
        })
        draft = generate_local_cot(backend, MEDIA, SPAN, GOLD, "c1")
        assert draft.text == PARTIAL_TEXT
        assert draft.sources_present == ("vocal_prosody",)

    def test_two_sourceless_drafts_fail(self):
        backend = ScriptedBackend({("vid", "cot_generate", "8-20"): cot(SOURCELESS)})
        with pytest.raises(MalformedModelOutput, match="evidence sources"):
            generate_local_cot(backend, MEDIA, SPAN, GOLD, "c1")


class TestDualPathVerify:
    def backend(self, path1, path2):
        return ScriptedBackend({
            ("*", "emotion_from_text", GOOD_TEXT): emo(path1),
            ("vid", "emotion_from_text_and_clip", GOOD_TEXT): emo(path2),
        })

    def test_unanimous_agreement_accepts(self):
        outcome = dual_path_verify(self.backend("anger", "angry"), MEDIA, SPAN,
                                   GOOD_TEXT, GOLD)
        assert outcome.accepted
        assert outcome.path1 is GOLD and outcome.path2 is GOLD

    @pytest.mark.parametrize("p1,p2", [("joy", "anger"), ("anger", "joy"),
                                       ("joy", "fear")])
    def test_any_disagreement_rejects(self, p1, p2):
        outcome = dual_path_verify(self.backend(p1, p2), MEDIA, SPAN,
                                   GOOD_TEXT, GOLD)
        assert not outcome.accepted
        assert outcome.gold is GOLD


def accepting_fixture():
    return {
        ("vid", "cot_generate", "8-20"): cot(GOOD_TEXT),
        ("*", "emotion_from_text", GOOD_TEXT): emo("anger"),
        ("vid", "emotion_from_text_and_clip", GOOD_TEXT): emo("anger"),
    }


class TestAnnotateClip:
    def test_accepted_first_round(self):
        result = annotate_clip(ScriptedBackend(accepting_fixture()), MEDIA, SPAN,
                               GOLD, "c1")
        assert isinstance(result, AcceptedRationale)
        assert result.rounds_used == 1
        assert len(result.history) == 1
        assert result.history[0].outcome.accepted

    def test_second_round_rescues_a_failed_first(self):
        second = GOOD_TEXT + " (take two)"
        entries = {
            ("vid", "cot_generate", "8-20"): cot(GOOD_TEXT),
            ("vid", "cot_generate", "8-20#a2"): cot(second),
            # round 1: the text-only reader disagrees
            ("*", "emotion_from_text", GOOD_TEXT): emo("sadness"),
            ("vid", "emotion_from_text_and_clip", GOOD_TEXT): emo("anger"),
            # round 2: both agree on the new draft
            ("*", "emotion_from_text", second): emo("anger"),
            ("vid", "emotion_from_text_and_clip", second): emo("anger"),
        }
        result = annotate_clip(ScriptedBackend(entries), MEDIA, SPAN, GOLD, "c1")
        assert isinstance(result, AcceptedRationale)
        assert result.rounds_used == 2
        assert result.text == second
        assert [r.outcome.accepted for r in result.history] == [False, True]

    def test_three_failures_escalate(self):
        entries = accepting_fixture()
        entries[("*", "emotion_from_text", GOOD_TEXT)] = emo("sadness")
        result = annotate_clip(ScriptedBackend(entries), MEDIA, SPAN, GOLD, "c1",
                               clock=clock_at(777.0))
        assert isinstance(result, ReviewItem)
        assert result.status is ReviewStatus.PENDING
        assert len(result.history) == 3
        assert result.escalated_at == 777.0
        assert result.gold_emotion is GOLD

    def test_transport_failures_do_not_consume_rounds(self):
        backend = FailureInjectionBackend(
            ScriptedBackend(accepting_fixture()),
            lambda: TransportError("flaky"), times=2,
            tasks=[Task.EMOTION_FROM_TEXT])
        result = annotate_clip(backend, MEDIA, SPAN, GOLD, "c1", retry_attempts=3)
        assert isinstance(result, AcceptedRationale)
        assert result.rounds_used == 1
        assert backend.injected == 2

    def test_unrecoverable_transport_failure_aborts(self):
        backend = FailureInjectionBackend(
            ScriptedBackend(accepting_fixture()),
            lambda: TransportError("down"), times=99)
        with pytest.raises(TransportError):
            annotate_clip(backend, MEDIA, SPAN, GOLD, "c1", retry_attempts=2)


GOOD_QUERIES = {"queries": [
    {"text": "that scene where I got so mad", "style_tag": "vague_memory"},
    {"text": "a doorway and raised voices", "style_tag": "scene_impression"},
    {"text": "the part that made my chest tighten", "style_tag": "emotional_experience"},
]}


class TestBuildQueries:
    def test_three_styles_returned_in_payload_order(self):
        backend = ScriptedBackend({("vid", "query_generate", "8-20"): GOOD_QUERIES})
        queries = build_queries(backend, MEDIA, SPAN, GOLD, "rationale")
        assert len(queries) == 3
        assert [q.style.value for q in queries] == [
            "vague_memory", "scene_impression", "emotional_experience"]

    def test_bad_first_payload_regenerated(self):
        backend = ScriptedBackend({
            ("vid", "query_generate", "8-20"): {
                "queries": GOOD_QUERIES["queries"][:2]},
            ("vid", "query_generate", "8-20#a2"): GOOD_QUERIES,
        })
        assert len(build_queries(backend, MEDIA, SPAN, GOLD, "r")) == 3

    @pytest.mark.parametrize("payload,problem", [
        ({"queries": GOOD_QUERIES["queries"][:2]}, "expected 3"),
        ({"queries": [dict(q, text="same words") for q in GOOD_QUERIES["queries"]]},
         "duplicate"),
        ({"queries": [dict(q, style_tag="vague_memory")
                      for q in GOOD_QUERIES["queries"]]}, "style tags"),
    ])
    def test_persistent_bad_payload_fails(self, payload, problem):
        backend = ScriptedBackend({("vid", "query_generate", "8-20"): payload})
        with pytest.raises(QueryGenerationFailed, match=problem):
            build_queries(backend, MEDIA, SPAN, GOLD, "r")


class TestLoadStage1:
    def write(self, tmp_path, rows):
        path = tmp_path / "stage1.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        return path

    def row(self, **over):
        base = {"video_id": "vid", "media_uri": "file:///vid.mp4",
                "duration_s": 60.0, "clip_id": "c1", "start_s": 8.0,
                "end_s": 20.0, "emotion": "Angry"}
        base.update(over)
        return base

    def test_good_file(self, tmp_path):
        clips = load_stage1(self.write(tmp_path, [self.row()]))
        assert clips == [Stage1Clip(media=MEDIA, clip_id="c1", span=SPAN,
                                    emotion=GOLD)]

    @pytest.mark.parametrize("over", [
        {"emotion": None, "_drop": "emotion"},
        {"end_s": 90.0},
        {"start_s": 30.0, "end_s": 20.0},
    ])
    def test_bad_rows(self, tmp_path, over):
        row = self.row(**{k: v for k, v in over.items() if k != "_drop"})
        if "_drop" in over:
            del row[over["_drop"]]
        with pytest.raises(ValidationError):
            load_stage1(self.write(tmp_path, [row]))

    def test_duplicate_clip_id(self, tmp_path):
        with pytest.raises(ValidationError, match="duplicate"):
            load_stage1(self.write(tmp_path, [self.row(), self.row(start_s=30.0,
                                                                   end_s=40.0)]))


class TestAnnotateStage:
    def test_mixed_outcomes_group_by_video(self):
        hard_text = "visual_style: murky; the shot is hard to read"
        entries = accepting_fixture()
        entries[("vid", "query_generate", "8-20")] = GOOD_QUERIES
        # second clip's draft never verifies
        entries[("vid", "cot_generate", "30-40")] = cot(hard_text)
        entries[("*", "emotion_from_text", hard_text)] = emo("neutral")
        entries[("vid", "emotion_from_text_and_clip", hard_text)] = emo("fear")
        clips = [
            Stage1Clip(media=MEDIA, clip_id="c1", span=SPAN, emotion=GOLD),
            Stage1Clip(media=MEDIA, clip_id="c2", span=TimeSpan(30, 40),
                       emotion=EmotionLabel.FEAR),
        ]
        records, escalated = annotate_stage(ScriptedBackend(entries), clips,
                                            clock=clock_at())
        assert len(records) == 1
        assert [c.clip_id for c in records[0].clips] == ["c1"]
        assert records[0].clips[0].rationale == GOOD_TEXT
        assert len(records[0].clips[0].queries) == 3
        assert [i.clip_id for i in escalated] == ["c2"]


def pending_item():
    return ReviewItem(clip_id="c1", media=MEDIA, span=SPAN, gold_emotion=GOLD,
                      history=(), status=ReviewStatus.PENDING, escalated_at=1.0)


def passing_verifier(item, text):
    label = item.correction.emotion if item.correction else item.gold_emotion
    return VerificationOutcome(path1=label, path2=label, gold=label)


def failing_verifier(item, text):
    gold = item.correction.emotion if item.correction else item.gold_emotion
    other = EmotionLabel.JOY if gold is not EmotionLabel.JOY else EmotionLabel.FEAR
    return VerificationOutcome(path1=gold, path2=other, gold=gold)


class TestApplyCorrection:
    def test_unaudited_correction_accepts(self):
        updated = apply_correction(pending_item(), "better rationale", "sadness",
                                   "rev1", audit=False, clock=clock_at())
        assert updated.status is ReviewStatus.ACCEPTED
        assert updated.correction.emotion is EmotionLabel.SADNESS
        assert updated.correction.reviewer == "rev1"

    def test_audited_pass_accepts(self):
        updated = apply_correction(pending_item(), "better", "sadness", "rev1",
                                   verifier=passing_verifier, clock=clock_at())
        assert updated.status is ReviewStatus.ACCEPTED
        assert updated.audit_failure is None

    def test_audited_failure_stays_corrected(self):
        updated = apply_correction(pending_item(), "better", "sadness", "rev1",
                                   verifier=failing_verifier, clock=clock_at())
        assert updated.status is ReviewStatus.CORRECTED
        assert updated.audit_failure is not None
        assert not updated.audit_failure.accepted

    def test_original_item_is_untouched(self):
        item = pending_item()
        apply_correction(item, "better", "sadness", "rev1", audit=False)
        assert item.status is ReviewStatus.PENDING and item.correction is None

    def test_only_pending_items_accept_corrections(self):
        done = apply_correction(pending_item(), "better", "sadness", "rev1",
                                audit=False)
        with pytest.raises(ItemNotPending):
            apply_correction(done, "again", "joy", "rev2", audit=False)

    @pytest.mark.parametrize("rationale,reviewer", [("  ", "rev"), ("ok", " ")])
    def test_blank_fields_rejected(self, rationale, reviewer):
        with pytest.raises(ValidationError):
            apply_correction(pending_item(), rationale, "joy", reviewer, audit=False)

    def test_unknown_emotion_rejected(self):
        with pytest.raises(UnknownEmotion):
            apply_correction(pending_item(), "ok", "blissful", "rev", audit=False)

    def test_audit_requires_verifier(self):
        with pytest.raises(ValueError, match="verifier"):
            apply_correction(pending_item(), "ok", "joy", "rev", audit=True)

    def test_make_verifier_targets_corrected_emotion(self):
        text = "corrected rationale text"
        backend = ScriptedBackend({
            ("*", "emotion_from_text", text): emo("sadness"),
            ("vid", "emotion_from_text_and_clip", text): emo("sadness"),
        })
        updated = apply_correction(pending_item(), text, "sadness", "rev1",
                                   verifier=make_verifier(backend))
        assert updated.status is ReviewStatus.ACCEPTED


class TestSerialization:
    def test_roundtrip_pending(self):
        item = pending_item()
        assert review_item_from_dict(review_item_to_dict(item)) == item

    def test_roundtrip_with_history_correction_and_audit(self):
        escalated = annotate_clip(
            ScriptedBackend({**accepting_fixture(),
                             ("*", "emotion_from_text", GOOD_TEXT): emo("joy")}),
            MEDIA, SPAN, GOLD, "c1", clock=clock_at())
        corrected = apply_correction(escalated, "fixed", "sadness", "rev",
                                     verifier=failing_verifier, clock=clock_at())
        restored = review_item_from_dict(review_item_to_dict(corrected))
        assert restored == corrected
        assert len(restored.history) == 3
        assert restored.audit_failure is not None


class TestReviewQueue:
    def queue(self, tmp_path, name="log.jsonl"):
        return ReviewQueue(tmp_path / name, clock=clock_at())

    def test_escalate_get_and_list(self, tmp_path):
        q = self.queue(tmp_path)
        q.escalate(pending_item())
        assert q.get("c1").clip_id == "c1"
        assert [i.clip_id for i in q.items()] == ["c1"]
        assert q.items(ReviewStatus.ACCEPTED) == []

    def test_duplicate_escalation_rejected(self, tmp_path):
        q = self.queue(tmp_path)
        q.escalate(pending_item())
        with pytest.raises(ValidationError, match="already"):
            q.escalate(pending_item())

    def test_get_unknown_raises(self, tmp_path):
        with pytest.raises(NotFound):
            self.queue(tmp_path).get("ghost")

    def test_paging(self, tmp_path):
        q = self.queue(tmp_path)
        for i in range(5):
            item = ReviewItem(clip_id=f"c{i}", media=MEDIA, span=SPAN,
                              gold_emotion=GOLD, history=(),
                              escalated_at=float(i))
            q.escalate(item)
        page1, total = q.page(page=1, page_size=2)
        page3, _ = q.page(page=3, page_size=2)
        assert total == 5
        assert [i.clip_id for i in page1] == ["c0", "c1"]
        assert [i.clip_id for i in page3] == ["c4"]
        with pytest.raises(ValidationError):
            q.page(page=0)

    def test_submit_then_replay(self, tmp_path):
        q = self.queue(tmp_path)
        q.escalate(pending_item())
        updated = q.submit("c1", "better", "sadness", "rev1", audit=False)
        assert updated.status is ReviewStatus.ACCEPTED

        replayed = ReviewQueue(tmp_path / "log.jsonl")
        assert replayed.items() == q.items()
        assert replayed.get("c1").correction.emotion is EmotionLabel.SADNESS

        events = [json.loads(line)["event"]
                  for line in (tmp_path / "log.jsonl").read_text().splitlines()]
        assert events == ["escalated", "accepted"]

    def test_failed_audit_is_logged_as_corrected(self, tmp_path):
        q = self.queue(tmp_path)
        q.escalate(pending_item())
        updated = q.submit("c1", "better", "sadness", "rev1",
                           verifier=failing_verifier)
        assert updated.status is ReviewStatus.CORRECTED
        replayed = ReviewQueue(tmp_path / "log.jsonl")
        assert replayed.get("c1").audit_failure is not None
        events = [json.loads(line)["event"]
                  for line in (tmp_path / "log.jsonl").read_text().splitlines()]
        assert events == ["escalated", "corrected"]

    def test_double_submit_rejected(self, tmp_path):
        q = self.queue(tmp_path)
        q.escalate(pending_item())
        q.submit("c1", "better", "sadness", "rev1", audit=False)
        with pytest.raises(ItemNotPending):
            q.submit("c1", "again", "joy", "rev2", audit=False)

    def test_corrupt_log_rejected(self, tmp_path):
        log = tmp_path / "log.jsonl"
        log.write_text('{"event": "corrected", "clip_id": "ghost", "item": {}}\n')
        with pytest.raises(ValidationError, match="unknown item"):
            ReviewQueue(log)
        log.write_text('{"event": "vanished"}\n')
        with pytest.raises(ValidationError, match="unknown event"):
            ReviewQueue(log)

    def test_concurrent_submits_one_winner(self, tmp_path):
        q = self.queue(tmp_path)
        q.escalate(pending_item())
        wins, losses = [], []
        barrier = threading.Barrier(8)

        def worker(n):
            barrier.wait()
            try:
                q.submit("c1", f"rationale {n}", "sadness", f"rev{n}", audit=False)
                wins.append(n)
            except ItemNotPending:
                losses.append(n)

        threads = [threading.Thread(target=worker, args=(n,)) for n in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(wins) == 1 and len(losses) == 7
        # the log holds exactly one correction event
        events = [json.loads(line)["event"]
                  for line in (tmp_path / "log.jsonl").read_text().splitlines()]
        assert events.count("accepted") == 1


class BernoulliBackend:
    """Text path always agrees with gold; the clip path agrees with
    probability p. Models an annotator pipeline with a noisy second reader."""

    def __init__(self, p, seed):
        self.p = p
        self.rng = random.Random(seed)

    def invoke(self, request):
        if request.task is Task.COT_GENERATE:
            return BackendResponse(structured={"text": GOOD_TEXT})
        gold = "anger"
        if request.task is Task.EMOTION_FROM_TEXT:
            return BackendResponse(structured={"emotion": gold})
        if request.task is Task.EMOTION_FROM_TEXT_AND_CLIP:
            label = gold if self.rng.random() < self.p else "joy"
            return BackendResponse(structured={"emotion": label})
        raise AssertionError(f"unexpected task {request.task}")


class TestEscalationRate:
    def test_matches_bernoulli_expectation(self):
        # each round fails with probability 0.4, so escalation (three failed
        # rounds) should land near 0.4 ** 3 = 0.064
        backend = BernoulliBackend(p=0.6, seed=601)
        n = 600
        escalated = 0
        for i in range(n):
            result = annotate_clip(backend, MEDIA, SPAN, GOLD, f"c{i}",
                                   clock=clock_at())
            escalated += isinstance(result, ReviewItem)
        rate = escalated / n
        expected = 0.4 ** 3
        sigma = (expected * (1 - expected) / n) ** 0.5
        assert abs(rate - expected) < 4 * sigma
