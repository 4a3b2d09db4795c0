"""Command-line entry points: split, stats, run, eval, judge, annotate, serve.

Option resolution order is flags, then the TOML config file, then
environment variables, then built-in defaults. All file outputs go through
atomic temp-then-rename writes.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import click

try:
    import tomllib  # py311+
except ImportError:
    import tomli as tomllib

from . import corpus as corpus_mod
from . import jsonl, metrics
from .agents import (
    OrchestrationConfig,
    failure_row,
    logical_clock,
    prediction_row,
    run_session,
)
from .annotation import (
    ReviewQueue,
    annotate_stage,
    load_stage1,
    make_verifier,
)
from .backends import RemoteBackend, ScriptedBackend
from .domain import MediaRef
from .errors import AffectSeekError, BudgetExhausted
from .judge import ModelJudge, RuleBasedJudge, judge_run, save_judge_results

ENV_PREFIX = "AFFECTSEEK"


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _cfg_get(cfg: dict, section: str, key: str):
    node = cfg.get(section)
    if isinstance(node, dict):
        return node.get(key)
    return None


def _resolve(flag, cfg: dict, section: str, key: str, env: Optional[str] = None,
             default=None):
    if flag is not None:
        return flag
    from_cfg = _cfg_get(cfg, section, key)
    if from_cfg is not None:
        return from_cfg
    if env is not None:
        from_env = os.environ.get(f"{ENV_PREFIX}_{env}")
        if from_env is not None:
            return from_env
    return default


def _parse_floats(raw) -> Tuple[float, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(float(x) for x in raw)
    return tuple(float(x) for x in str(raw).split(",") if x.strip())


def _build_backend(kind: str, fixture: Optional[str], base_url: Optional[str],
                   model: Optional[str]):
    if kind == "scripted":
        if not fixture:
            raise click.UsageError("--backend scripted requires --fixture")
        return ScriptedBackend.from_file(fixture)
    if kind == "remote":
        if not base_url or not model:
            raise click.UsageError("--backend remote requires --base-url and --model")
        return RemoteBackend(base_url, model)
    raise click.UsageError(f"unknown backend kind {kind!r}")


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="TOML config file; flags override it.")
@click.pass_context
def main(ctx: click.Context, config_path: Optional[str]):
    """Affective-moment localization pipeline and its evaluation tooling."""
    ctx.obj = _load_config(config_path)


def _fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(f"{type(exc).__name__}: {exc}")


# ---------------------------------------------------------------- split


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--ratios", default=None, help="train,val,test e.g. 0.5,0.25,0.25")
@click.pass_context
def split(ctx, corpus_path, out_path, seed, ratios):
    """Assign whole videos to train/val/test deterministically."""
    cfg = ctx.obj or {}
    seed = int(_resolve(seed, cfg, "split", "seed", env="SEED", default=7))
    ratios = _parse_floats(_resolve(ratios, cfg, "split", "ratios", default="0.5,0.25,0.25"))
    try:
        records = corpus_mod.load_corpus(corpus_path)
        assignment = corpus_mod.compute_split([r.media.video_id for r in records],
                                              seed=seed, ratios=ratios)
        corpus_mod.save_split(out_path, assignment)
    except AffectSeekError as exc:
        raise _fail(exc)
    counts = assignment.counts()
    click.echo(f"split {len(records)} videos with seed {seed}: "
               f"train={counts['train']} val={counts['val']} test={counts['test']} -> {out_path}")


# ---------------------------------------------------------------- stats


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="Also write the statistics as JSON.")
@click.pass_context
def stats(ctx, corpus_path, out_path):
    """Print corpus statistics; optionally write them as JSON."""
    try:
        records = corpus_mod.load_corpus(corpus_path)
        st = corpus_mod.compute_stats(records)
    except AffectSeekError as exc:
        raise _fail(exc)
    click.echo(corpus_mod.render_stats(st), nl=False)
    if out_path:
        jsonl.write_text(out_path, json.dumps(st.to_dict(), indent=2, sort_keys=True) + "\n")
        click.echo(f"wrote {out_path}")


# ---------------------------------------------------------------- run


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pairs", "pairs_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Pre-flattened evaluation pairs; skips flattening.")
@click.option("--split", "split_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--subset", default=None, type=click.Choice(["train", "val", "test"]))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--pairs-out", default=None, type=click.Path(dir_okay=False),
              help="Write the flattened pairs actually used (as eval ground truth).")
@click.option("--backend", "backend_kind", default=None, type=click.Choice(["scripted", "remote"]))
@click.option("--fixture", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--base-url", default=None)
@click.option("--model", default=None)
@click.option("--tau", type=float, default=None)
@click.option("--merge-gap", type=float, default=None)
@click.option("--max-steps", type=int, default=None)
@click.option("--max-localize-rounds", type=int, default=None)
@click.option("--max-reflect-rounds", type=int, default=None)
@click.option("--parallel", type=int, default=None, help="Worker threads (default 4).")
@click.option("--no-timestamps", is_flag=True, default=False,
              help="Use logical step counters instead of wall-clock times.")
@click.pass_context
def run(ctx, corpus_path, pairs_path, split_path, subset, out_path, pairs_out,
        backend_kind, fixture, base_url, model, tau, merge_gap, max_steps,
        max_localize_rounds, max_reflect_rounds, parallel, no_timestamps):
    """Answer every evaluation pair and write a prediction file."""
    cfg = ctx.obj or {}
    backend_kind = _resolve(backend_kind, cfg, "backend", "kind", env="BACKEND",
                            default="scripted")
    fixture = _resolve(fixture, cfg, "backend", "fixture", env="FIXTURE")
    base_url = _resolve(base_url, cfg, "backend", "base_url", env="BASE_URL")
    model = _resolve(model, cfg, "backend", "model", env="MODEL")
    parallel = int(_resolve(parallel, cfg, "run", "parallel", default=4))

    orch = OrchestrationConfig(
        tau=float(_resolve(tau, cfg, "orchestration", "tau", default=0.5)),
        merge_gap_s=float(_resolve(merge_gap, cfg, "orchestration", "merge_gap_s", default=1.0)),
        max_steps=int(_resolve(max_steps, cfg, "orchestration", "max_steps", default=12)),
        max_localize_rounds=int(_resolve(max_localize_rounds, cfg, "orchestration",
                                         "max_localize_rounds", default=2)),
        max_reflect_rounds=int(_resolve(max_reflect_rounds, cfg, "orchestration",
                                        "max_reflect_rounds", default=2)),
    )

    try:
        records = corpus_mod.load_corpus(corpus_path)
        media_by_video: Dict[str, MediaRef] = {r.media.video_id: r.media for r in records}
        if pairs_path:
            pairs = corpus_mod.load_pairs(pairs_path)
        else:
            assignment = corpus_mod.load_split(split_path) if split_path else None
            want = corpus_mod.parse_split_name(subset) if subset else None
            pairs = corpus_mod.flatten_pairs(records, assignment, want)
        backend = _build_backend(backend_kind, fixture, base_url, model)
    except AffectSeekError as exc:
        raise _fail(exc)

    missing = sorted({p.video_id for p in pairs} - set(media_by_video))
    if missing:
        raise click.ClickException(f"pairs reference videos absent from the corpus: {missing}")

    def answer_one(pair) -> dict:
        clock = logical_clock() if no_timestamps else time.time
        try:
            result = run_session(backend, media_by_video[pair.video_id], pair.query,
                                 config=orch, clock=clock)
        except BudgetExhausted as exc:
            return failure_row(pair.pair_id, exc)
        return prediction_row(pair.pair_id, result)

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(answer_one, pairs))
    else:
        rows = [answer_one(p) for p in pairs]

    jsonl.write_lines(out_path, rows)
    if pairs_out:
        corpus_mod.save_pairs(pairs_out, pairs)
    n_failed = sum(1 for r in rows if "pred_start_s" not in r)
    click.echo(f"answered {len(rows)} pairs ({n_failed} without an answer) -> {out_path}")


# ---------------------------------------------------------------- eval


@main.command("eval")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--thresholds", default=None, help="e.g. 0.3,0.5,0.7")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@click.option("--score", type=float, default=None,
              help="Mean judge score to show in the table's Score column.")
@click.pass_context
def eval_cmd(ctx, gt_path, pred_path, thresholds, out_path, score):
    """Score a prediction file against flattened ground truth."""
    cfg = ctx.obj or {}
    taus = _parse_floats(_resolve(thresholds, cfg, "eval", "thresholds", default="0.3,0.5,0.7"))
    try:
        pairs = corpus_mod.load_pairs(gt_path)
        preds = metrics.load_predictions(pred_path)
        report = metrics.evaluate_run(pairs, preds, taus)
    except (AffectSeekError, ValueError) as exc:
        raise _fail(exc)
    click.echo(metrics.render_table(report, score), nl=False)
    if out_path:
        jsonl.write_text(out_path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        click.echo(f"wrote {out_path}")


# ---------------------------------------------------------------- judge


@main.command()
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--summary", "summary_path", default=None, type=click.Path(dir_okay=False))
@click.option("--scorer", default="model", type=click.Choice(["model", "rule"]))
@click.option("--backend", "backend_kind", default=None, type=click.Choice(["scripted", "remote"]))
@click.option("--fixture", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--base-url", default=None)
@click.option("--model", default=None)
@click.pass_context
def judge(ctx, gt_path, pred_path, out_path, summary_path, scorer, backend_kind,
          fixture, base_url, model):
    """Grade predicted explanations against the reference rationales."""
    cfg = ctx.obj or {}
    try:
        pairs = corpus_mod.load_pairs(gt_path)
        preds = metrics.load_predictions(pred_path)
        if scorer == "rule":
            chosen = RuleBasedJudge()
        else:
            backend_kind = _resolve(backend_kind, cfg, "backend", "kind", env="BACKEND",
                                    default="scripted")
            fixture = _resolve(fixture, cfg, "backend", "fixture", env="FIXTURE")
            base_url = _resolve(base_url, cfg, "backend", "base_url", env="BASE_URL")
            model = _resolve(model, cfg, "backend", "model", env="MODEL")
            chosen = ModelJudge(_build_backend(backend_kind, fixture, base_url, model))
        result = judge_run(pairs, preds, chosen)
        save_judge_results(out_path, result)
    except (AffectSeekError, ValueError) as exc:
        raise _fail(exc)
    summary = result.summary()
    if summary_path:
        jsonl.write_text(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    mean = summary["mean_total"]
    click.echo(f"judged {summary['n_judged']} predictions "
               f"({summary['n_skipped']} skipped), mean score "
               f"{mean:.2f}" if mean is not None else "judged 0 predictions")


# ---------------------------------------------------------------- annotate


@main.command()
@click.option("--clips", "clips_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Stage-1 file: labelled spans without rationales.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--review-log", "review_log", required=True, type=click.Path(dir_okay=False))
@click.option("--backend", "backend_kind", default=None, type=click.Choice(["scripted", "remote"]))
@click.option("--fixture", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--base-url", default=None)
@click.option("--model", default=None)
@click.option("--max-rounds", type=int, default=3)
@click.option("--no-timestamps", is_flag=True, default=False)
@click.pass_context
def annotate(ctx, clips_path, out_path, review_log, backend_kind, fixture,
             base_url, model, max_rounds, no_timestamps):
    """Draft, verify, and query-tag rationales for labelled clips."""
    cfg = ctx.obj or {}
    backend_kind = _resolve(backend_kind, cfg, "backend", "kind", env="BACKEND",
                            default="scripted")
    fixture = _resolve(fixture, cfg, "backend", "fixture", env="FIXTURE")
    base_url = _resolve(base_url, cfg, "backend", "base_url", env="BASE_URL")
    model = _resolve(model, cfg, "backend", "model", env="MODEL")
    clock = logical_clock() if no_timestamps else time.time
    try:
        clips = load_stage1(clips_path)
        backend = _build_backend(backend_kind, fixture, base_url, model)
        records, escalated = annotate_stage(backend, clips, max_rounds=max_rounds,
                                            clock=clock)
        corpus_mod.save_corpus(out_path, records)
        queue = ReviewQueue(review_log, clock=clock)
        for item in escalated:
            queue.escalate(item)
    except AffectSeekError as exc:
        raise _fail(exc)
    n_accepted = sum(len(r.clips) for r in records)
    click.echo(f"accepted {n_accepted}/{len(clips)} clips -> {out_path}; "
               f"escalated {len(escalated)} -> {review_log}")


# ---------------------------------------------------------------- serve


@main.command()
@click.option("--review-log", "review_log", required=True, type=click.Path(dir_okay=False))
@click.option("--media-dir", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--backend", "backend_kind", default=None, type=click.Choice(["scripted", "remote"]))
@click.option("--fixture", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--base-url", default=None)
@click.option("--model", default=None)
@click.option("--no-audit", is_flag=True, default=False,
              help="Accept corrections without re-running dual-path verification.")
@click.pass_context
def serve(ctx, review_log, media_dir, host, port, backend_kind, fixture,
          base_url, model, no_audit):
    """Serve the review queue over HTTP for the companion UI."""
    import uvicorn

    from .review_service import create_app

    cfg = ctx.obj or {}
    host = _resolve(host, cfg, "serve", "host", default="127.0.0.1")
    port = int(_resolve(port, cfg, "serve", "port", default=8787))
    media_dir = _resolve(media_dir, cfg, "serve", "media_dir")
    token = os.environ.get(f"{ENV_PREFIX}_REVIEW_TOKEN") or None
    verifier = None
    if not no_audit:
        backend_kind = _resolve(backend_kind, cfg, "backend", "kind", env="BACKEND",
                                default="scripted")
        fixture = _resolve(fixture, cfg, "backend", "fixture", env="FIXTURE")
        base_url = _resolve(base_url, cfg, "backend", "base_url", env="BASE_URL")
        model = _resolve(model, cfg, "backend", "model", env="MODEL")
        verifier = make_verifier(_build_backend(backend_kind, fixture, base_url, model))
    queue = ReviewQueue(review_log)
    app = create_app(queue, media_dir=media_dir, verifier=verifier, token=token,
                     audit=not no_audit)
    click.echo(f"serving review queue on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
