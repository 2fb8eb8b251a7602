"""Command-line front end for the puzzle foundry pipeline."""

from __future__ import annotations

import random
import sys

import click

from .config import Settings
from .corpus import (
    ingest_lichess_csv,
    load_corpus,
    make_synthetic_rows,
    save_corpus,
    write_lichess_csv,
)
from .evolve import EvoConfig
from .ngram import NgramModel, fit_ngram
from .pipeline import (
    GenerateConfig,
    NothingAccepted,
    corpus_index,
    export_booklet,
    gate_novelty,
    label_candidates,
    probe_search_cost,
    rank_and_select,
    run_generate,
    score_candidates,
)
from .rwr import RwrConfig
from .store import Store
from .uci import EnginePool, resolve_profile


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Flat key=value config file.")
@click.option("--seed", type=int, default=None)
@click.option("--store", "store_path", default=None, help="Candidate event log path.")
@click.option("--corpus", "corpus_path", default=None, help="Ingested corpus path.")
@click.option("--model", "model_path", default=None, help="Character model path.")
@click.option("--strong-engine", default=None, help="Strong engine command.")
@click.option("--weak-engine", default=None, help="Weak engine command.")
@click.option("--depth-strong", type=int, default=None)
@click.option("--depth-weak", type=int, default=None)
@click.option("--workers", type=int, default=None, help="Engine pairs in the pool.")
@click.pass_context
def main(ctx, config_path, seed, store_path, corpus_path, model_path, strong_engine,
         weak_engine, depth_strong, depth_weak, workers):
    """Generate, score, label, curate, and export chess puzzle candidates."""
    overrides = {
        "seed": seed,
        "store_path": store_path,
        "corpus_path": corpus_path,
        "model_path": model_path,
        "strong_engine": strong_engine,
        "weak_engine": weak_engine,
        "depth_strong": depth_strong,
        "depth_weak": depth_weak,
        "workers": workers,
    }
    ctx.obj = Settings.from_sources(config_path, overrides)


def _pool(settings: Settings) -> EnginePool:
    strong = resolve_profile(
        "strong", settings.strong_engine, settings.depth_strong,
        multipv=2, hash_mb=settings.hash_mb,
    )
    weak = resolve_profile(
        "weak", settings.weak_engine, settings.depth_weak, hash_mb=settings.hash_mb
    )
    return EnginePool(strong, weak, size=settings.workers)


@main.command()
@click.argument("csv_path", type=click.Path(exists=True))
@click.pass_obj
def ingest(settings: Settings, csv_path):
    """Ingest a puzzle-dump CSV into the corpus store."""
    records, report = ingest_lichess_csv(csv_path)
    save_corpus(records, settings.corpus_path)
    click.echo(
        f"accepted {report.accepted} of {report.total} rows -> {settings.corpus_path}"
    )
    for reason, count in sorted(report.skipped.items()):
        click.echo(f"  skipped {count}: {reason}")


@main.command("synth-corpus")
@click.option("--rows", type=int, default=1000)
@click.option("--mate-rows", type=int, default=0)
@click.option("--out", "out_path", default="synthetic.csv")
@click.pass_obj
def synth_corpus(settings: Settings, rows, mate_rows, out_path):
    """Write a deterministic synthetic corpus CSV (no network needed)."""
    data = make_synthetic_rows(rows, seed=settings.seed, mate_rows=mate_rows)
    write_lichess_csv(data, out_path)
    click.echo(f"wrote {len(data)} rows -> {out_path}")


@main.command()
@click.option("--order", type=int, default=8)
@click.option("--smoothing", type=float, default=0.1)
@click.pass_obj
def train(settings: Settings, order, smoothing):
    """Fit the character model on the ingested corpus."""
    records = _load_corpus_or_fail(settings)
    fens = [" ".join(rec.fen.split()[:2]) for rec in records]
    model = fit_ngram(fens, order=order, smoothing=smoothing)
    model.save(settings.model_path)
    click.echo(
        f"fitted order-{order} model on {len(fens)} positions -> {settings.model_path}"
    )


def _load_corpus_or_fail(settings: Settings):
    import os

    if not os.path.exists(settings.corpus_path):
        raise click.ClickException(
            f"corpus not found at {settings.corpus_path}; run ingest first"
        )
    records = load_corpus(settings.corpus_path)
    if not records:
        raise click.ClickException("corpus is empty; run ingest first")
    return records


@main.command()
@click.option("--source", type=click.Choice(["ngram", "rwr", "evolve"]), default="ngram")
@click.option("--n", "count", type=int, default=100, help="Samples (ngram source).")
@click.option("--rounds", type=int, default=3, help="RWR rounds.")
@click.option("--samples-per-round", type=int, default=500)
@click.option("--keep-quantile", type=float, default=0.1)
@click.option("--population", type=int, default=128)
@click.option("--generations", type=int, default=200)
@click.option("--verify-plies", type=int, default=None)
@click.pass_obj
def generate(settings: Settings, source, count, rounds, samples_per_round,
             keep_quantile, population, generations, verify_plies):
    """Sample candidates, score, label, and novelty-gate them."""
    records = _load_corpus_or_fail(settings)
    config = GenerateConfig(
        source=source,
        count=count,
        seed=settings.seed,
        verify_plies=settings.verify_plies if verify_plies is None else verify_plies,
        duplicate_threshold=settings.novelty_threshold,
        thresholds=settings.thresholds(),
        rwr=RwrConfig(
            rounds=rounds,
            samples_per_round=samples_per_round,
            keep_quantile=keep_quantile,
        ),
        evo=EvoConfig(population=population, generations=generations),
    )
    store = Store(settings.store_path)
    try:
        with _pool(settings) as pool:
            candidates = run_generate(
                store, records, pool, config,
                on_stats=lambda s: click.echo(
                    f"  round {s.round}: mean={s.mean_reward:.4f} "
                    f"max={s.max_reward:.3f} legal={s.legal_fraction:.2f}"
                ),
            )
        unique = sum(
            1 for c in candidates
            if c.reward_report and c.reward_report.uniqueness.unique
        )
        click.echo(
            f"persisted {len(candidates)} candidates ({unique} unique) "
            f"-> {settings.store_path}"
        )
    finally:
        store.close()


@main.command()
@click.pass_obj
def score(settings: Settings):
    """Score candidates that have no reward report yet."""
    store = Store(settings.store_path)
    try:
        pending = [
            c for c in store.all_candidates()
            if c.reward_report is None and not c.score_failed
        ]
        if not pending:
            click.echo("nothing to score")
            return
        with _pool(settings) as pool:
            score_candidates(
                store,
                [c.position() for c in pending],
                ["rescore"] * len(pending),
                pool,
                settings.thresholds(),
                settings.verify_plies,
            )
        click.echo(f"scored {len(pending)} candidates")
    finally:
        store.close()


@main.command()
@click.option("--probes/--no-probes", default=False,
              help="Let engine-assisted detectors borrow a handle.")
@click.pass_obj
def label(settings: Settings, probes):
    """Run theme detectors over scored candidates."""
    store = Store(settings.store_path)
    try:
        scored = [c for c in store.all_candidates() if c.reward_report is not None]
        pool = _pool(settings) if probes else None
        try:
            label_candidates(store, scored, pool, settings.thresholds(), probes)
        finally:
            if pool:
                pool.close()
        click.echo(f"labeled {len(scored)} candidates")
    finally:
        store.close()


@main.command()
@click.pass_obj
def novelty(settings: Settings):
    """Attach nearest corpus neighbors to every candidate."""
    records = _load_corpus_or_fail(settings)
    store = Store(settings.store_path)
    try:
        candidates = list(store.all_candidates())
        gate_novelty(store, candidates, corpus_index(records), records)
        click.echo(f"computed neighbors for {len(candidates)} candidates")
    finally:
        store.close()


@main.command()
@click.option("--per-theme", type=int, default=None)
@click.pass_obj
def rank(settings: Settings, per_theme):
    """Select the top candidates per theme for review."""
    store = Store(settings.store_path)
    try:
        manifest = rank_and_select(
            store,
            per_theme or settings.per_theme,
            settings.novelty_threshold,
        )
        for theme, ids in manifest.items():
            click.echo(f"{theme}: {len(ids)} review-pending")
    finally:
        store.close()


@main.command()
@click.option("--schedule", default="6,8,10,12", help="Comma-separated depths.")
@click.option("--baseline-size", type=int, default=100)
@click.pass_obj
def probe(settings: Settings, schedule, baseline_size):
    """Measure search cost; flag node-hungry candidates."""
    records = _load_corpus_or_fail(settings)
    rng = random.Random(settings.seed)
    baseline = [
        rec.position() for rec in rng.sample(records, min(baseline_size, len(records)))
    ]
    depths = [int(d) for d in schedule.split(",")]
    store = Store(settings.store_path)
    try:
        with _pool(settings) as pool:
            summary = probe_search_cost(store, pool, depths, baseline)
        click.echo(
            f"probed {summary['probed']} candidates; flagged {summary['flagged']} "
            f"above baseline p95 ({summary['baseline_p95']} nodes)"
        )
    finally:
        store.close()


@main.command()
@click.option("--format", "fmt", type=click.Choice(["markdown", "json"]), default="markdown")
@click.option("--out", "out_path", default=None)
@click.option("--policy", type=click.Choice(["any-accept", "unanimous"]), default="any-accept")
@click.pass_obj
def export(settings: Settings, fmt, out_path, policy):
    """Export accepted candidates as a booklet document."""
    store = Store(settings.store_path)
    try:
        try:
            text = export_booklet(store, fmt, policy)
        except NothingAccepted as exc:
            raise click.ClickException(str(exc)) from exc
        if out_path:
            with open(out_path, "w", encoding="utf-8") as f:
                f.write(text)
            click.echo(f"wrote {out_path}")
        else:
            click.echo(text)
    finally:
        store.close()


@main.command()
@click.option("--port", type=int, default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--policy", type=click.Choice(["any-accept", "unanimous"]), default="any-accept")
@click.pass_obj
def serve(settings: Settings, port, host, policy):
    """Serve the review API for the curation UI."""
    import uvicorn

    from .service import create_app

    store = Store(settings.store_path)
    app = create_app(store, policy)
    uvicorn.run(app, host=host, port=port or settings.port, log_level="info")


if __name__ == "__main__":
    main()
