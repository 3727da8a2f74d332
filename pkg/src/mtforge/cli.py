"""Operator-facing command surface.

Every subcommand accepts --seed (single source of randomness, threaded to
each stochastic component) and --report (machine-readable JSON with a fixed
schema_version). Output files are written atomically, so an error exit
leaves declared outputs absent or untouched. Exit codes: 0 success, 1
validation/usage error, 2 runtime or IO error.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from importlib.resources import files as resource_files
from pathlib import Path

import click
import jsonschema

from . import backends as backends_mod
from . import chimera as chimera_mod
from . import corpus as corpus_mod
from . import minlsh as dedup_mod
from . import evalkit as evalkit_mod
from . import filters as filters_mod
from . import langid as langid_mod
from . import mixopt as mixopt_mod
from . import ngram_lm as lm_mod
from . import rewards as rewards_mod
from .backends import BackendFailure, backend_from_obj
from .errors import MtforgeError, OrchestrationError, ValidationError
from .ioutils import atomic_write, dump_json, read_jsonl, write_jsonl
from .scorers import ScorerEndpoint, scorer_from_obj

REPORT_SCHEMA_VERSION = 1

# built-in local scorers usable as a --scorer shorthand, with their scales
_SCORER_SHORTHAND_RANGES = {"chrf": (0.0, 100.0), "length_ratio": (0.0, 1.0)}


def _write_report(path: str | None, command: str, seed: int, payload: dict) -> None:
    if not path:
        return
    report = {"schema_version": REPORT_SCHEMA_VERSION, "command": command, "seed": seed}
    report.update(payload)
    dump_json(path, report)


def _load_schema(name: str) -> dict:
    return json.loads(resource_files("mtforge.schemas").joinpath(name).read_text("utf-8"))


def _validate_config(obj: dict, schema_name: str, where: str) -> None:
    try:
        jsonschema.validate(obj, _load_schema(schema_name))
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"{where}: {exc.message}") from exc


def _load_scorer(spec: str) -> ScorerEndpoint:
    """A scorer flag is either a JSON config file or a local-function shorthand."""
    path = Path(spec)
    if spec.endswith(".json") or path.exists():
        with open(path, encoding="utf-8") as handle:
            return scorer_from_obj(json.load(handle))
    if spec.startswith("constant:"):
        return ScorerEndpoint(name=spec, kind="local_function", config=spec)
    if spec in _SCORER_SHORTHAND_RANGES:
        return ScorerEndpoint(
            name=spec, kind="local_function", config=spec,
            score_range=_SCORER_SHORTHAND_RANGES[spec],
        )
    raise ValidationError(f"unknown scorer {spec!r} (not a file or a built-in)")


def _dropped_rows(dropped, extra_key: str):
    for record, value in dropped:
        obj = corpus_mod.record_to_obj(record)
        obj[extra_key] = value
        yield obj


@click.group(name="mtforge")
def cli():
    """Corpus curation, mixture optimization, rewards, and translation fusion."""


# -- language identification -------------------------------------------------


@cli.command("langid-train")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--min-n", default=1, show_default=True)
@click.option("--max-n", default=3, show_default=True)
@click.option("--alpha", default=0.5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def langid_train(in_path, model_path, min_n, max_n, alpha, seed, report_path):
    """Train the character-n-gram language identifier on a labeled corpus."""
    docs = corpus_mod.read_corpus(in_path, "mono")
    model = langid_mod.train_langid(docs, ngram_range=(min_n, max_n), alpha=alpha)
    langid_mod.save_langid(model, model_path)
    _write_report(report_path, "langid-train", seed, {
        "counts": {"documents": len(docs), "classes": len(model.classes), "vocab": len(model.vocab)},
        "params": {"min_n": min_n, "max_n": max_n, "alpha": alpha},
    })


@cli.command("langid-filter")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--expected", required=True)
@click.option("--min-confidence", default=0.5, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dropped", "dropped_path", type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def langid_filter(in_path, model_path, expected, min_confidence, out_path, dropped_path, seed, report_path):
    """Keep documents identified as the expected language."""
    docs = corpus_mod.read_corpus(in_path, "mono")
    model = langid_mod.load_langid(model_path)
    kept, dropped = langid_mod.filter_by_language(docs, model, expected, min_confidence)
    corpus_mod.write_corpus(kept, out_path)
    if dropped_path:
        write_jsonl(dropped_path, (
            dict(corpus_mod.record_to_obj(doc), predicted=pred, confidence=conf)
            for doc, pred, conf in dropped
        ))
    _write_report(report_path, "langid-filter", seed, {
        "counts": {"input": len(docs), "kept": len(kept), "dropped": len(dropped)},
        "params": {"expected": expected, "min_confidence": min_confidence},
    })


# -- deduplication -------------------------------------------------------------


@cli.command("dedup")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dropped", "dropped_path", type=click.Path(), help="Defaults to <out>.dropped.jsonl")
@click.option("--shingle-n", default=5, show_default=True)
@click.option("--k", default=128, show_default=True)
@click.option("--bands", default=16, show_default=True)
@click.option("--rows", default=8, show_default=True)
@click.option("--threshold", default=0.8, show_default=True)
@click.option("--unit", default="word", type=click.Choice(["word", "char"]), show_default=True)
@click.option("--jobs", type=int, default=lambda: os.cpu_count() or 1, help="Signature threads [default: cores]")
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def dedup_cmd(in_path, out_path, dropped_path, shingle_n, k, bands, rows, threshold, unit, jobs, seed, report_path):
    """Remove near-duplicate documents via MinHash + banded LSH."""
    docs = corpus_mod.read_corpus(in_path, "mono")
    kept, dropped = dedup_mod.dedup(
        docs, n=shingle_n, k=k, seed=seed, b=bands, r=rows,
        jaccard_threshold=threshold, unit=unit, jobs=jobs,
    )
    corpus_mod.write_corpus(kept, out_path)
    dropped_path = dropped_path or f"{out_path}.dropped.jsonl"
    write_jsonl(dropped_path, (
        {"dropped_id": d.dropped_id, "kept_id": d.kept_id, "estimated_jaccard": d.estimated_jaccard}
        for d in dropped
    ))
    _write_report(report_path, "dedup", seed, {
        "counts": {"input": len(docs), "kept": len(kept), "dropped": len(dropped)},
        "params": {"shingle_n": shingle_n, "k": k, "bands": bands, "rows": rows,
                   "threshold": threshold, "unit": unit},
        "kernel_backend": dedup_mod.KERNEL_BACKEND,
    })


# -- n-gram LM -----------------------------------------------------------------


@cli.command("lm-train")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--order", default=3, show_default=True)
@click.option("--discount", default=0.75, show_default=True)
@click.option("--min-count", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def lm_train(in_path, model_path, order, discount, min_count, seed, report_path):
    """Train the interpolated Kneser-Ney n-gram model."""
    docs = corpus_mod.read_corpus(in_path, "mono")
    lm = lm_mod.train_lm(docs, order=order, discount=discount, min_count=min_count)
    lm_mod.save_lm(lm, model_path)
    _write_report(report_path, "lm-train", seed, {
        "counts": {"documents": len(docs), "vocab": len(lm.vocab)},
        "params": {"order": order, "discount": discount, "min_count": min_count},
    })


@cli.command("lm-filter")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--mode", default="percentile", type=click.Choice(["percentile", "absolute"]), show_default=True)
@click.option("--q", default=0.95, show_default=True)
@click.option("--max-ppl", type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dropped", "dropped_path", type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def lm_filter(in_path, model_path, mode, q, max_ppl, out_path, dropped_path, seed, report_path):
    """Drop high-perplexity documents."""
    docs = corpus_mod.read_corpus(in_path, "mono")
    lm = lm_mod.load_lm(model_path)
    kept, dropped = lm_mod.filter_high_perplexity(docs, lm, mode=mode, max_ppl=max_ppl, q=q)
    corpus_mod.write_corpus(kept, out_path)
    if dropped_path:
        write_jsonl(dropped_path, _dropped_rows(dropped, "perplexity"))
    _write_report(report_path, "lm-filter", seed, {
        "counts": {"input": len(docs), "kept": len(kept), "dropped": len(dropped)},
        "params": {"mode": mode, "q": q, "max_ppl": max_ppl},
    })


# -- quality -------------------------------------------------------------------


@cli.command("quality-score")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--unscored", "unscored_path", type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def quality_score(in_path, out_path, unscored_path, seed, report_path):
    """Attach the weighted composite quality score.

    Documents must carry knowledge_value / authenticity / writing_style in
    their scores map; those missing a dimension go to the unscored output.
    """
    docs = corpus_mod.read_corpus(in_path, "mono")
    scored, missing = filters_mod.score_documents(docs)
    corpus_mod.write_corpus(scored, out_path)
    if unscored_path:
        corpus_mod.write_corpus(missing, unscored_path)
    _write_report(report_path, "quality-score", seed, {
        "counts": {"input": len(docs), "scored": len(scored), "unscored": len(missing)},
    })


@cli.command("quality-filter")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--scorer", "scorer_spec", required=True)
@click.option("--tau", required=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dropped", "dropped_path", type=click.Path())
@click.option("--unscored", "unscored_path", type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def quality_filter(in_path, scorer_spec, tau, out_path, dropped_path, unscored_path, seed, report_path):
    """Keep parallel pairs whose quality-estimation score is >= tau."""
    pairs = corpus_mod.read_corpus(in_path, "parallel")
    scorer = _load_scorer(scorer_spec)
    kept, dropped, unscored = filters_mod.threshold_filter(pairs, scorer, tau)
    corpus_mod.write_corpus(kept, out_path)
    if dropped_path:
        corpus_mod.write_corpus(dropped, dropped_path)
    if unscored_path:
        corpus_mod.write_corpus(unscored, unscored_path)
    _write_report(report_path, "quality-filter", seed, {
        "counts": {"input": len(pairs), "kept": len(kept),
                   "dropped": len(dropped), "unscored": len(unscored)},
        "params": {"scorer": scorer.name, "tau": tau},
    })


@cli.command("judge-flag")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--max-spread", required=True, type=float)
@click.option("--out", "out_path", type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def judge_flag(in_path, max_spread, out_path, seed, report_path):
    """Flag samples whose judge scores disagree across rounds."""
    records = []
    for lineno, obj in read_jsonl(in_path):
        try:
            records.append(filters_mod.JudgeRecord(obj["sample_id"], tuple(obj["round_scores"])))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{in_path}: line {lineno}: bad judge record ({exc})") from exc
    consistent, flagged = filters_mod.flag_inconsistent(records, max_spread)
    if out_path:
        dump_json(out_path, {"consistent": consistent, "flagged": flagged})
    _write_report(report_path, "judge-flag", seed, {
        "counts": {"input": len(records), "consistent": len(consistent), "flagged": len(flagged)},
        "flagged_ids": flagged,
        "params": {"max_spread": max_spread},
    })


# -- mixture optimization --------------------------------------------------------


@cli.command("mix-sample")
@click.option("--domains", required=True, help="Comma-separated domain names")
@click.option("--n", required=True, type=int)
@click.option("--alpha", default=1.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def mix_sample(domains, n, alpha, out_path, seed, report_path):
    """Sample candidate mixtures from a symmetric Dirichlet."""
    names = [d.strip() for d in domains.split(",") if d.strip()]
    mixtures = mixopt_mod.sample_mixtures(names, n, dirichlet_alpha=alpha, seed=seed)
    write_jsonl(out_path, (m.to_obj() for m in mixtures))
    _write_report(report_path, "mix-sample", seed, {
        "counts": {"samples": len(mixtures), "domains": len(names)},
        "params": {"alpha": alpha},
    })


@cli.command("mix-fit")
@click.option("--runs", "runs_path", required=True, type=click.Path(exists=True))
@click.option("--ridge-lambda", default=0.0, show_default=True)
@click.option("--model-out", "model_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def mix_fit(runs_path, ridge_lambda, model_path, seed, report_path):
    """Fit the ratio-to-loss regression from proxy runs."""
    runs = mixopt_mod.read_proxy_runs(runs_path)
    model = mixopt_mod.fit_regression(runs, ridge_lambda=ridge_lambda)
    dump_json(model_path, model.to_obj())
    residuals = [model.predict(r.mixture) - r.observed_loss for r in runs]
    rmse = (sum(r * r for r in residuals) / len(residuals)) ** 0.5
    _write_report(report_path, "mix-fit", seed, {
        "counts": {"runs": len(runs), "features": len(model.coefficients)},
        "params": {"ridge_lambda": ridge_lambda},
        "in_sample_rmse": rmse,
    })


@cli.command("mix-optimize")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--candidates", default=65536, show_default=True)
@click.option("--replay-fraction", type=float)
@click.option("--replay-domain")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def mix_optimize(model_path, candidates, replay_fraction, replay_domain, out_path, seed, report_path):
    """Pick the mixture minimizing predicted loss; optionally blend a replay share."""
    with open(model_path, encoding="utf-8") as handle:
        obj = json.load(handle)
    model = mixopt_mod.RegressionModel(
        tuple(obj["domains"]), tuple(obj["coefficients"]), obj["ridge_lambda"]
    )
    best = mixopt_mod.optimize_mixture(model, candidates, seed=seed)
    predicted = model.predict(best)
    if (replay_fraction is None) != (replay_domain is None):
        raise ValidationError("--replay-fraction and --replay-domain go together")
    if replay_fraction is not None:
        best = mixopt_mod.blend_replay(best, replay_fraction, replay_domain)
    dump_json(out_path, best.to_obj())
    _write_report(report_path, "mix-optimize", seed, {
        "counts": {"candidates": candidates},
        "params": {"replay_fraction": replay_fraction, "replay_domain": replay_domain},
        "predicted_loss": predicted,
    })


@cli.command("lr-curve")
@click.option("--warmup", required=True, type=int)
@click.option("--total", required=True, type=int)
@click.option("--peak", required=True, type=float)
@click.option("--min-lr", required=True, type=float)
@click.option("--shape", default="cosine", type=click.Choice(["cosine", "linear"]), show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def lr_curve(warmup, total, peak, min_lr, shape, out_path, seed, report_path):
    """Export the warmup-then-decay learning-rate schedule as CSV."""
    schedule = mixopt_mod.LrSchedule(warmup, total, peak, min_lr, shape)
    with atomic_write(out_path) as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "lr"])
        for step in range(total + 1):
            writer.writerow([step, repr(mixopt_mod.lr_at(schedule, step))])
    _write_report(report_path, "lr-curve", seed, {
        "counts": {"steps": total + 1},
        "params": {"warmup": warmup, "total": total, "peak": peak,
                   "min_lr": min_lr, "shape": shape},
    })


# -- rewards -------------------------------------------------------------------


@cli.command("reward-score")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--terms", "terms_path", required=True, type=click.Path(exists=True))
@click.option("--scorer", "scorer_spec", help="Quality scorer for records without a quality field")
@click.option("--w-quality", default=0.5, show_default=True)
@click.option("--w-terminology", default=0.5, show_default=True)
@click.option("--w-repetition", default=1.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def reward_score(in_path, terms_path, scorer_spec, w_quality, w_terminology, w_repetition,
                 out_path, seed, report_path):
    """Compute the full reward breakdown for translation records.

    Input lines carry {"id", "source", "hypothesis"} plus an optional
    "quality" in [0, 1]; records without one are scored via --scorer.
    """
    table = rewards_mod.load_term_table(terms_path)
    weights = rewards_mod.RewardWeights(w_quality, w_terminology, w_repetition)
    scorer = _load_scorer(scorer_spec) if scorer_spec else None
    rows = []
    for lineno, obj in read_jsonl(in_path):
        try:
            rows.append((obj.get("id", str(lineno)), obj["source"], obj["hypothesis"], obj.get("quality")))
        except KeyError as exc:
            raise ValidationError(f"{in_path}: line {lineno}: missing field {exc}") from exc

    out_rows = []
    for rec_id, source, hypothesis, quality in rows:
        if quality is None:
            if scorer is None:
                raise ValidationError(f"record {rec_id!r} has no quality score and no --scorer was given")
            quality = scorer.score_one({"source": source, "hypothesis": hypothesis})
            if quality is None:
                raise OrchestrationError(f"quality scorer failed on record {rec_id!r}")
        breakdown = rewards_mod.composite_reward(
            quality,
            rewards_mod.terminology_reward(source, hypothesis, table),
            rewards_mod.repetition_score(hypothesis),
            weights,
        )
        out_rows.append(dict(breakdown.to_obj(), id=rec_id))
    write_jsonl(out_path, out_rows)
    _write_report(report_path, "reward-score", seed, {
        "counts": {"records": len(out_rows)},
        "params": {"w_quality": w_quality, "w_terminology": w_terminology,
                   "w_repetition": w_repetition},
    })


@cli.command("grpo-advantages")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--epsilon", default=1e-8, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def grpo_advantages_cmd(in_path, epsilon, out_path, seed, report_path):
    """Normalize reward groups to group-relative advantages."""
    out_rows = []
    for lineno, obj in read_jsonl(in_path):
        if "rewards" not in obj:
            raise ValidationError(f"{in_path}: line {lineno}: missing 'rewards'")
        advantages = rewards_mod.grpo_advantages(obj["rewards"], epsilon=epsilon)
        out_rows.append({"id": obj.get("id", str(lineno)), "rewards": obj["rewards"],
                         "advantages": advantages})
    write_jsonl(out_path, out_rows)
    _write_report(report_path, "grpo-advantages", seed, {
        "counts": {"groups": len(out_rows)},
        "params": {"epsilon": epsilon},
    })


# -- generation and fusion -------------------------------------------------------


def _load_chimera_config(path: str):
    with open(path, encoding="utf-8") as handle:
        obj = json.load(handle)
    _validate_config(obj, "chimera_config.schema.json", path)
    backend = backend_from_obj(obj["backend"])
    fusion_backend = backend_from_obj(obj["fusion_backend"]) if "fusion_backend" in obj else backend
    grid = None
    if "grid" in obj:
        grid = [backends_mod.GenerationParams(**entry) for entry in obj["grid"]]
    per_slot = None
    if "per_slot_backends" in obj:
        per_slot = [backend_from_obj(e) if e is not None else None for e in obj["per_slot_backends"]]
    scorer = scorer_from_obj(obj["fallback_scorer"]) if "fallback_scorer" in obj else None
    return backend, fusion_backend, grid, per_slot, scorer, obj.get("max_workers", 4)


def _read_sources(path: str):
    sources = []
    for lineno, obj in read_jsonl(path):
        missing = {"id", "src_lang", "tgt_lang", "text"} - set(obj)
        if missing:
            raise ValidationError(f"{path}: line {lineno}: missing fields {sorted(missing)}")
        sources.append(obj)
    return sources


@cli.command("translate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--jobs", type=int, help="Override the config's request concurrency")
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def translate(config_path, in_path, out_path, jobs, seed, report_path):
    """Generate a candidate set per source segment over the sampling grid."""
    backend, _fusion, grid, per_slot, _scorer, max_workers = _load_chimera_config(config_path)
    if jobs is not None:
        max_workers = jobs
    sources = _read_sources(in_path)
    out_rows = []
    for src in sources:
        cand = chimera_mod.generate_candidates(
            backend, src["src_lang"], src["tgt_lang"], src["text"],
            grid=grid, per_slot_backends=per_slot, max_workers=max_workers,
        )
        out_rows.append({
            "id": src["id"],
            "source": cand.source_text,
            "src_lang": cand.src_lang,
            "tgt_lang": cand.tgt_lang,
            "candidates": list(cand.candidates),
            "params_used": [p.to_obj() for p in cand.params_used],
            "failed_slots": [f.index for f in cand.failures],
        })
    write_jsonl(out_path, out_rows)
    _write_report(report_path, "translate", seed, {
        "counts": {"sources": len(sources),
                   "candidates": sum(len(r["candidates"]) for r in out_rows)},
    })


@cli.command("fuse")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--jobs", type=int, help="Override the config's request concurrency")
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def fuse_cmd(config_path, in_path, out_path, jobs, seed, report_path):
    """Generate candidates and fuse them into one refined output per segment."""
    backend, fusion_backend, grid, per_slot, scorer, max_workers = _load_chimera_config(config_path)
    if jobs is not None:
        max_workers = jobs
    sources = _read_sources(in_path)
    out_rows = []
    fallback_count = 0
    for src in sources:
        cand = chimera_mod.generate_candidates(
            backend, src["src_lang"], src["tgt_lang"], src["text"],
            grid=grid, per_slot_backends=per_slot, max_workers=max_workers,
        )
        result = chimera_mod.fuse(fusion_backend, cand, fallback_scorer=scorer)
        fallback_count += result.fallback_used
        out_rows.append({
            "id": src["id"],
            "source": cand.source_text,
            "candidates": list(cand.candidates),
            "fused": result.fused_text,
            "fallback_used": result.fallback_used,
            "scores": list(result.candidate_scores) if result.candidate_scores else None,
        })
    write_jsonl(out_path, out_rows)
    _write_report(report_path, "fuse", seed, {
        "counts": {"sources": len(sources), "fallbacks": fallback_count},
    })


# -- evaluation ------------------------------------------------------------------


@cli.command("eval")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--hyps", "hyps_path", required=True, type=click.Path(exists=True))
@click.option("--metric", default="chrf", show_default=True,
              help="'chrf' or a scorer JSON config file")
@click.option("--aggregation", default="micro", type=click.Choice(["micro", "macro"]), show_default=True)
@click.option("--out", "out_path", type=click.Path())
@click.option("--text", "text_mode", is_flag=True, help="Print the aligned text table")
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def eval_cmd(pairs_path, hyps_path, metric, aggregation, out_path, text_mode, seed, report_path):
    """Score hypotheses against references and report per direction group."""
    pairs = corpus_mod.read_corpus(pairs_path, "parallel")
    hyps = {}
    for lineno, obj in read_jsonl(hyps_path):
        if "id" not in obj or "hypothesis" not in obj:
            raise ValidationError(f"{hyps_path}: line {lineno}: need 'id' and 'hypothesis'")
        hyps[obj["id"]] = obj["hypothesis"]
    metric_arg = metric if metric == "chrf" else _load_scorer(metric)
    scored, failures = evalkit_mod.score_corpus(pairs, hyps, metric_arg)
    report = evalkit_mod.group_report(scored, aggregation=aggregation)
    if out_path:
        dump_json(out_path, report.to_obj())
    if text_mode:
        click.echo(report.render_text())
    _write_report(report_path, "eval", seed, {
        "counts": {"pairs": len(pairs), "scored": len(scored), "failed": len(failures)},
        "result": report.to_obj(),
    })


# -- pipeline --------------------------------------------------------------------


def _build_stages(config: dict, seed: int, jobs: int):
    stages = []
    for entry in config["stages"]:
        kind = entry["type"]
        if kind == "langid":
            stages.append(filters_mod.LangIdStage(
                model=langid_mod.load_langid(entry["model"]),
                expected=corpus_mod.require_tag(entry["expected"]),
                min_confidence=entry.get("min_confidence", 0.5),
            ))
        elif kind == "dedup":
            stages.append(filters_mod.DedupStage(
                n=entry.get("shingle_n", 5),
                k=entry.get("k", 128),
                seed=seed,
                b=entry.get("bands", 16),
                r=entry.get("rows", 8),
                jaccard_threshold=entry.get("threshold", 0.8),
                unit=entry.get("unit", "word"),
                jobs=jobs,
            ))
        elif kind == "perplexity":
            stages.append(filters_mod.PerplexityStage(
                lm=lm_mod.load_lm(entry["model"]),
                mode=entry["mode"],
                max_ppl=entry.get("max_ppl"),
                q=entry.get("q", 0.95),
            ))
        elif kind == "quality_threshold":
            stages.append(filters_mod.QualityThresholdStage(
                scorer=scorer_from_obj(entry["scorer"]),
                tau=entry["tau"],
            ))
        else:  # unreachable once the schema validated
            raise ValidationError(f"unknown stage type {kind!r}")
    return stages


@cli.command("pipeline-run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--jobs", type=int, default=lambda: os.cpu_count() or 1, help="Worker threads [default: cores]")
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path())
def pipeline_run(config_path, jobs, seed, report_path):
    """Run a configured cleaning pipeline with per-stage accounting."""
    with open(config_path, encoding="utf-8") as handle:
        config = json.load(handle)
    _validate_config(config, "pipeline_config.schema.json", config_path)
    seed = config.get("seed", seed)
    stages = _build_stages(config, seed, jobs)
    records = corpus_mod.read_corpus(config["input"], config["kind"])
    for stage in stages:
        if stage.record_kind != config["kind"]:
            raise ValidationError(
                f"stage {stage.name!r} expects {stage.record_kind} records, config says {config['kind']}"
            )
    result = filters_mod.run_pipeline(records, stages)
    corpus_mod.write_corpus(result.final, config["output"])
    if "dropped_output" in config:
        write_jsonl(config["dropped_output"], (
            dict(corpus_mod.record_to_obj(record), stage=stage_name, reason=reason)
            for stage_name, record, reason in result.dropped
        ))
    _write_report(report_path, "pipeline-run", seed, {
        "counts": {"input": len(records), "output": len(result.final),
                   "dropped": len(result.dropped), "unscored": len(result.unscored)},
        "stages": [r.to_obj() for r in result.reports],
    })


def main(argv: list[str] | None = None) -> int:
    """Entry point with explicit exit-code mapping."""
    try:
        cli.main(args=argv, prog_name="mtforge", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        message = exc.format_message()
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        click.echo(f"error: {message}", err=True)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (OrchestrationError, BackendFailure, MtforgeError, OSError, RuntimeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
