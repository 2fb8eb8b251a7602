"""Pipeline orchestration: generate, score, label, gate, rank, export.

The candidate store is the single source of truth; each stage reads it
and appends events. Scoring fans out over an engine pool; everything
else is pure computation over immutable values.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence
from urllib.parse import quote

from .board import Position, parse_fen, serialize_fen
from .corpus import CorpusRecord
from .evolve import EvoConfig, GenerationStats, evolve
from .ngram import NgramModel, RejectionBudgetExhausted, fit_ngram, sample_fen
from .notation import line_san
from .novelty import NoveltyIndex, build_index
from .rewards import RewardReport, RewardThresholds, ScoreFailed, reward
from .rwr import RwrConfig, rwr_iterate
from .store import Store, PuzzleCandidate
from .themes import THEMES, detect_themes
from .uci import EnginePair, EnginePool, EngineProfile, StabilityResult

BOOKLET_SECTION_ORDER = (
    "sacrifice",
    "underpromotion",
    "attacking-withdrawal",
    "knight-on-rim",
    "stalemate-sacrifice",
    "novotny",
    "interference",
    "unprotected-position",
    "xray",
    "paralysis",
    "bristol",
    "king-on-tour",
    "switchback",
    "smothered-mate",
)

SECTION_TITLES = {
    "sacrifice": "Sacrifice",
    "underpromotion": "Underpromotion",
    "attacking-withdrawal": "Attacking Withdrawal",
    "knight-on-rim": "Knight on the Rim",
    "stalemate-sacrifice": "Sacrifice Pieces to Stalemate",
    "novotny": "Novotny",
    "interference": "Interference",
    "unprotected-position": "Unprotected Position",
    "xray": "X-Ray Attack",
    "paralysis": "Paralysis",
    "bristol": "Bristol",
    "king-on-tour": "King on Tour",
    "switchback": "Switchback",
    "smothered-mate": "Smothered Mate",
}


class NothingAccepted(RuntimeError):
    pass


class EnginesUnconfigured(RuntimeError):
    pass


@dataclass(frozen=True)
class GenerateConfig:
    source: str = "ngram"  # ngram | rwr | evolve
    count: int = 100
    seed: int = 0
    ngram_order: int = 8
    smoothing: float = 0.1
    max_attempts: int = 100
    verify_plies: int = 0
    label_probes: bool = False
    novelty_k: int = 3
    duplicate_threshold: float = 0.85
    thresholds: RewardThresholds = field(default_factory=RewardThresholds)
    rwr: RwrConfig = field(default_factory=RwrConfig)
    evo: EvoConfig = field(default_factory=lambda: EvoConfig(generations=20, population=32))
    evo_seed_count: int = 32


def lichess_analysis_url(fen: str) -> str:
    return "https://lichess.org/analysis/" + quote(fen, safe="/")


def score_candidates(
    store: Store,
    positions: Sequence[Position],
    sources: Sequence[str],
    pool: EnginePool,
    thresholds: RewardThresholds,
    verify_plies: int = 0,
    reports: Optional[Sequence[Optional[RewardReport]]] = None,
) -> list[PuzzleCandidate]:
    """Add, score, and persist candidates; reuses precomputed reports."""

    def job(item, pair: EnginePair):
        position, ready = item
        if ready is not None:
            return ready
        try:
            return reward(pair, position, thresholds, verify_plies=verify_plies)
        except ScoreFailed:
            return None

    ready = list(reports) if reports else [None] * len(positions)
    results = pool.map(job, list(zip(positions, ready)))
    out = []
    depth = pool.strong_depth
    for position, source, result in zip(positions, sources, results):
        cand = store.add_candidate(serialize_fen(position), source)
        if result is None:
            store.record_score_failure(cand.id)
        else:
            store.record_score(cand.id, result, depth)
        out.append(store.get(cand.id))
    return out


def label_candidates(
    store: Store,
    candidates: Sequence[PuzzleCandidate],
    pool: Optional[EnginePool] = None,
    thresholds: RewardThresholds = RewardThresholds(),
    use_probes: bool = False,
) -> None:
    pair = pool.acquire() if (pool and use_probes) else None
    try:
        for cand in candidates:
            report = cand.reward_report
            line = list(report.solution_line) if report else []
            line = _legal_prefix(cand.position(), line)
            if not line:
                store.record_labels(cand.id, [])
                continue
            labels = detect_themes(
                cand.position(), line, probes=pair, thresholds=thresholds
            )
            store.record_labels(cand.id, labels)
    finally:
        if pair is not None:
            pool.release(pair)


def _legal_prefix(position: Position, line: list) -> list:
    """Keep the longest legal prefix of an engine-provided line."""
    from .board import legal_moves

    out = []
    cur = position
    for move in line:
        if move not in legal_moves(cur):
            break
        out.append(move)
        cur = _advance(cur, move)
    return out


def _advance(position: Position, move) -> Position:
    from .board import apply_move

    return apply_move(position, move, check_legal=False)


def gate_novelty(
    store: Store,
    candidates: Sequence[PuzzleCandidate],
    index: NoveltyIndex,
    records: Sequence[CorpusRecord],
    k: int = 3,
) -> None:
    fens = {rec.puzzle_id: rec.fen for rec in records}
    for cand in candidates:
        ranked = index.nearest(cand.position(), k)
        max_sim = ranked[0][1] if ranked else 0.0
        rows = [(str(s), v, fens.get(str(s), "")) for s, v in ranked]
        store.record_neighbors(cand.id, rows, max_sim)


def corpus_index(records: Sequence[CorpusRecord]) -> NoveltyIndex:
    return build_index([(rec.puzzle_id, rec.position()) for rec in records])


def run_generate(
    store: Store,
    records: Sequence[CorpusRecord],
    pool: EnginePool,
    config: GenerateConfig,
    on_stats: Optional[Callable[[GenerationStats], None]] = None,
) -> list[PuzzleCandidate]:
    """Full generate stage for one source: sample, score, label, gate."""
    if pool is None:
        raise EnginesUnconfigured("run_generate needs a configured engine pool")
    corpus_fens = [" ".join(rec.fen.split()[:2]) for rec in records]
    rng = random.Random(config.seed)
    thresholds = config.thresholds

    positions: list[Position] = []
    sources: list[str] = []
    reports: list[Optional[RewardReport]] = []

    def pooled_eval(items: list[Position], _scorer) -> list:
        def job(position, pair: EnginePair):
            try:
                return reward(pair, position, thresholds, verify_plies=config.verify_plies)
            except ScoreFailed:
                return None

        return pool.map(job, list(items))

    if config.source == "ngram":
        model = fit_ngram(corpus_fens, config.ngram_order, config.smoothing)
        stats = _sample_block(model, rng, config, positions, sources)
        store.record_generation_stats("ngram", [stats.as_dict()])
        reports = [None] * len(positions)
    elif config.source == "rwr":
        model = fit_ngram(corpus_fens, config.ngram_order, config.smoothing)
        collected: list[tuple[Position, Optional[RewardReport]]] = []

        def collecting_eval(items: list[Position], scorer) -> list:
            results = pooled_eval(items, scorer)
            collected.extend(zip(items, results))
            return results

        _model, stats_log = rwr_iterate(
            model,
            corpus_fens,
            lambda p: None,  # unused: eval_many supplies the scorer
            config.rwr,
            rng=rng,
            eval_many=collecting_eval,
            on_round=on_stats,
        )
        store.record_generation_stats("rwr", [s.as_dict() for s in stats_log])
        for round_index, (position, report) in enumerate(collected):
            positions.append(position)
            sources.append("rwr")
            reports.append(report)
    elif config.source == "evolve":
        seeds = [records[i].position() for i in range(min(config.evo_seed_count, len(records)))]
        evo = replace(config.evo, rng_seed=config.seed)
        final, stats_log = evolve(
            seeds, evo, lambda p: 0.0, on_generation=on_stats, eval_many=pooled_eval
        )
        store.record_generation_stats("evolve", [s.as_dict() for s in stats_log])
        for ind in final:
            positions.append(ind.position)
            sources.append(f"evolution-gen-{ind.born_generation}")
            reports.append(ind.report)
    else:
        raise ValueError(f"unknown source {config.source!r}")

    candidates = score_candidates(
        store, positions, sources, pool, thresholds, config.verify_plies, reports
    )
    label_candidates(store, candidates, pool, thresholds, config.label_probes)
    gate_novelty(store, candidates, corpus_index(records), records, config.novelty_k)
    return candidates


def _sample_block(model, rng, config: GenerateConfig, positions, sources) -> GenerationStats:
    attempts = 0
    for _ in range(config.count):
        try:
            outcome = sample_fen(model, rng, config.max_attempts)
        except RejectionBudgetExhausted as exc:
            attempts += exc.attempts
            continue
        attempts += outcome.attempts
        positions.append(outcome.position)
        sources.append("ngram")
    return GenerationStats(
        round=0,
        samples=config.count,
        legal_fraction=len(positions) / max(1, attempts),
        mean_reward=0.0,
        max_reward=0.0,
        unique_fraction=0.0,
    )


def rank_and_select(
    store: Store,
    per_theme: int = 50,
    duplicate_threshold: float = 0.85,
    record: bool = True,
) -> dict[str, list[str]]:
    """Top-k per theme by reward; ties by trickiness, novelty, then id."""
    manifest: dict[str, list[str]] = {}
    for theme in THEMES:
        pool = [
            c
            for c in store.all_candidates()
            if theme in c.theme_names()
            and c.reward_report is not None
            and not c.score_failed
            and (c.max_similarity is None or c.max_similarity < duplicate_threshold)
        ]
        pool.sort(
            key=lambda c: (-c.reward, -c.ci_score, c.max_similarity or 0.0, c.id)
        )
        chosen = [c.id for c in pool[:per_theme]]
        if chosen:
            manifest[theme] = chosen
            if record:
                store.record_selection(theme, chosen)
    return manifest


def probe_search_cost(
    store: Store,
    pool: EnginePool,
    schedule: Sequence[int],
    baseline_positions: Sequence[Position],
    candidates: Optional[Sequence[PuzzleCandidate]] = None,
) -> dict[str, int]:
    """Node-hunger probe; flags candidates beyond the corpus p95 baseline."""

    def measure(position: Position, pair: EnginePair) -> Optional[StabilityResult]:
        try:
            return pair.strong.bestmove_stability(position, list(schedule))
        except Exception:
            return None

    baseline_results = pool.map(measure, list(baseline_positions))
    baseline = sorted(
        r.nodes_total for r in baseline_results if r is not None
    )
    if not baseline:
        raise RuntimeError("baseline probe produced no measurements")
    store.record_baseline(baseline)
    threshold = percentile(baseline, 95)

    targets = list(candidates) if candidates is not None else list(store.all_candidates())
    results = pool.map(measure, [c.position() for c in targets])
    flagged = 0
    for cand, res in zip(targets, results):
        if res is None:
            continue
        adversarial = res.nodes_total > threshold
        flagged += adversarial
        store.record_probe(cand.id, res.nodes_total, res.first_stable_depth, adversarial)
    return {"baseline_p95": threshold, "flagged": flagged, "probed": len(targets)}


def percentile(sorted_values: Sequence[int], pct: float) -> int:
    if not sorted_values:
        raise ValueError("empty sample")
    rank = max(0, min(len(sorted_values) - 1, round(pct / 100 * (len(sorted_values) - 1))))
    return sorted_values[int(rank)]


def export_booklet(
    store: Store, fmt: str = "markdown", policy: str = "any-accept"
) -> str:
    """Accepted candidates grouped by theme in collection section order."""
    accepted = store.accepted(policy)
    if not accepted:
        raise NothingAccepted("no accepted candidates to export")
    # A puzzle belongs to every section whose theme it carries, matching
    # the collection's habit of revisiting a position per theme.
    sections: dict[str, list[PuzzleCandidate]] = {}
    for cand in sorted(accepted, key=lambda c: (-c.reward, c.id)):
        themes = cand.theme_names() or ["uncategorized"]
        for theme in themes:
            if theme in BOOKLET_SECTION_ORDER:
                sections.setdefault(theme, []).append(cand)
        if not any(t in BOOKLET_SECTION_ORDER for t in themes):
            sections.setdefault("uncategorized", []).append(cand)

    ordered = [t for t in BOOKLET_SECTION_ORDER if t in sections]
    if "uncategorized" in sections:
        ordered.append("uncategorized")

    if fmt == "json":
        payload = {
            "format": "puzzle-booklet",
            "version": 1,
            "sections": [
                {
                    "theme": theme,
                    "title": SECTION_TITLES.get(theme, "Uncategorized"),
                    "entries": [_entry_dict(c) for c in sections[theme]],
                }
                for theme in ordered
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)
    if fmt != "markdown":
        raise ValueError(f"unknown format {fmt!r}")

    lines = ["# Puzzle Collection", ""]
    for theme in ordered:
        lines.append(f"## {SECTION_TITLES.get(theme, 'Uncategorized')}")
        lines.append("")
        for cand in sections[theme]:
            entry = _entry_dict(cand)
            side = "White" if entry["side_to_move"] == "w" else "Black"
            lines.append(f"### `{entry['fen']}`")
            lines.append("")
            lines.append(f"{side} to move. [Analyse on Lichess]({entry['analysis_url']})")
            lines.append("")
            if entry["solution_san"]:
                lines.append(f"Solution: {' '.join(entry['solution_san'])}")
                lines.append("")
            closest = [n for n in entry["closest"] if n["fen"]]
            if closest:
                links = " ".join(
                    f"[[{i + 1}]]({lichess_analysis_url(n['fen'])})"
                    for i, n in enumerate(closest)
                )
                lines.append(f"Closest corpus positions: {links}")
                lines.append("")
    return "\n".join(lines)


def _entry_dict(cand: PuzzleCandidate) -> dict:
    position = cand.position()
    line = list(cand.reward_report.solution_line) if cand.reward_report else []
    neighbors = []
    for source_id, sim in cand.neighbors[:3]:
        neighbors.append(
            {
                "id": source_id,
                "similarity": sim,
                "fen": cand.neighbor_fens.get(source_id, ""),
            }
        )
    return {
        "id": cand.id,
        "fen": cand.fen,
        "side_to_move": "w" if position.side > 0 else "b",
        "analysis_url": lichess_analysis_url(cand.fen),
        "reward": cand.reward,
        "ci_score": cand.ci_score,
        "themes": cand.theme_names(),
        "solution_uci": [m.uci() for m in line],
        "solution_san": line_san(position, line) if line else [],
        "closest": neighbors,
    }


def import_booklet_json(text: str) -> dict:
    payload = json.loads(text)
    if payload.get("format") != "puzzle-booklet":
        raise ValueError("not a booklet export")
    return payload
