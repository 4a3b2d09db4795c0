#!/usr/bin/env python3
"""Regenerate the shipped oracle fixture under fixtures/oracle/.

The fixture is a tiny corpus whose scripted backend answers every query
with exactly the ground-truth interval and label, so an end-to-end run is
fully predictable: mean tIoU 1.0, Joint@0.7 equal to label accuracy, one
reflection pass per session. vid01 additionally encodes the
coarse-0..24 -> refined-8..20 -> anger trajectory that the replay tests
pin down.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from affectseek import jsonl  # noqa: E402

OUT = ROOT / "fixtures" / "oracle"

# video_id -> (duration_s, [(clip_id, start, end, emotion, rationale, evidence, queries)])
CORPUS = {
    "vid01": (120.0, [
        ("c01", 8.0, 20.0, "anger",
         "He clutches the neck wound while bloodstains spread across the floor; "
         "he steps into a dark puddle and his breathing turns ragged as the "
         "camera pushes in on his clenched jaw.",
         "bloodstains spread from the neck wound as he steps into a dark puddle",
         ["I think someone was hurt and there was blood on the ground somewhere",
          "Maybe it was a dark street and someone stepped into a puddle that was not water",
          "I kind of felt the rage boiling over in that dark alley scene"]),
    ]),
    "vid02": (300.0, [
        ("c01", 30.0, 45.0, "joy",
         "The whole family bursts out laughing around the breakfast table while "
         "warm morning light floods the kitchen and the score turns bright.",
         "the family laughs together in warm morning light",
         ["I think there was a big family laugh at a table in the morning",
          "Maybe it was a sunny kitchen where everyone seemed really happy",
          "I kind of smiled along when they all cracked up together"]),
        ("c02", 100.0, 118.0, "sadness",
         "She reads the letter alone in the dim hallway, shoulders sinking, and "
         "wipes her eyes as the music drops to a single piano line.",
         "she wipes her eyes while reading the letter in the dim hallway",
         ["I think a woman read some bad news in a letter by herself",
          "Maybe it was a dark hallway where someone started crying quietly",
          "I kind of felt my chest tighten when she lowered the page"]),
    ]),
    "vid03": (240.0, [
        ("c01", 12.0, 26.0, "fear",
         "The boy backs away from the rattling door, the hand-held camera "
         "shakes with him, and every creak lands loud in the silence.",
         "the boy backs away from the rattling door in near silence",
         ["I think a kid was terrified of something behind a door",
          "Maybe it was a shaky dark room where every sound felt too loud",
          "I kind of held my breath when the door started to rattle"]),
        ("c02", 60.0, 75.0, "surprise",
         "The lights snap on and the crowd jumps out yelling while she drops "
         "her keys, frozen mid-step with her mouth open.",
         "she freezes and drops her keys when the crowd jumps out",
         ["I think there was a surprise party where someone totally froze",
          "Maybe it was a dark room that suddenly lit up full of people",
          "I kind of jumped myself when they all shouted at once"]),
    ]),
    "vid04": (180.0, [
        ("c01", 90.0, 105.0, "trust",
         "He hands over the ledger without a word and she takes it, holding his "
         "gaze; the two-shot keeps them level as the standoff music resolves.",
         "he hands over the ledger and she holds his gaze",
         ["I think two people finally stopped doubting each other over a book",
          "Maybe it was a quiet office where a handover felt like a truce",
          "I kind of relaxed when she actually took what he offered"]),
    ]),
    "vid05": (200.0, [
        ("c01", 20.0, 35.0, "neutral",
         "The clerk stamps forms at an even pace under flat fluorescent light; "
         "the shot holds static and nobody raises their voice.",
         "the clerk stamps forms at an even pace under flat light",
         ["I think there was a long boring counter scene with paperwork",
          "Maybe it was a gray office where someone just kept stamping forms",
          "I kind of zoned out during the part with the clerk"]),
    ]),
}

# 7 clips x 3 queries = 21 pairs; the shipped pairs file keeps the first 20.
PAIRS_LIMIT = 20

JUDGE_DIMS = [2, 2, 2, 1, 2, 2]  # total 11 -> correct


def span_key(start: float, end: float) -> str:
    return f"{start:g}-{end:g}"


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)

    corpus_rows = []
    pair_rows = []
    backend_rows = []

    for video_id, (duration, clips) in CORPUS.items():
        corpus_rows.append({
            "video_id": video_id,
            "media_uri": f"media/{video_id}.mp4",
            "duration_s": duration,
            "clips": [
                {"clip_id": cid, "start_s": start, "end_s": end, "emotion": emo,
                 "rationale": rationale, "queries": queries}
                for cid, start, end, emo, rationale, _evidence, queries in clips
            ],
        })
        for cid, start, end, emo, rationale, evidence, queries in clips:
            coarse = {"start_s": max(start - 8.0, 0.0), "end_s": min(end + 4.0, duration)}
            for i, query in enumerate(queries):
                pair_rows.append({
                    "pair_id": f"{video_id}::{cid}::q{i}",
                    "video_id": video_id,
                    "query": query,
                    "gt_start_s": start,
                    "gt_end_s": end,
                    "gt_emotion": emo,
                    "gt_rationale": rationale,
                })
                backend_rows.append({
                    "video_id": video_id, "task": "coarse_localize", "key": query,
                    "response": {"spans": [coarse]},
                })
                backend_rows.append({
                    "video_id": video_id, "task": "refine", "key": query,
                    "response": {"spans": [{"start_s": start, "end_s": end}]},
                })
            backend_rows.append({
                "video_id": video_id, "task": "verify", "key": span_key(start, end),
                "response": {"alpha": 0.9, "visual_evidence": evidence,
                             "uncertainty": 0.2, "rationale": f"segment matches: {evidence}"},
            })
            backend_rows.append({
                "video_id": video_id, "task": "summarize_classify",
                "key": span_key(start, end),
                "response": {
                    "emotion": emo,
                    "rationale": rationale,
                    "evidence": [{"kind": "emotion_evidence",
                                  "payload": f"{evidence}; reads as {emo}"}],
                },
            })

    pair_rows = pair_rows[:PAIRS_LIMIT]
    for pair in pair_rows:
        # judge requests carry no media, so they resolve under the wildcard video
        backend_rows.append({
            "video_id": "*", "task": "judge", "key": pair["pair_id"],
            "response": {"dims": JUDGE_DIMS, "major_hallucination": False},
        })

    n_corpus = jsonl.write_lines(OUT / "corpus.jsonl", corpus_rows)
    n_pairs = jsonl.write_lines(OUT / "pairs.jsonl", pair_rows)
    n_backend = jsonl.write_lines(OUT / "backend.jsonl", backend_rows)
    print(f"wrote {n_corpus} corpus rows, {n_pairs} pairs, {n_backend} backend entries -> {OUT}")


if __name__ == "__main__":
    main()
