"""Evolutionary search over board positions.

A population of positions is evolved with random board edits under
tournament selection and elitism, with the scoring callback (typically
the engine reward) as fitness. Every emitted position satisfies the
board invariants; realism enforcement is optional because the most
surprising specimens are often wildly unnatural tableaux.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .board import (
    BISHOP,
    KING,
    KNIGHT,
    PAWN,
    QUEEN,
    ROOK,
    Position,
    serialize_fen,
    structural_violations,
    validate_realism,
)
from .rewards import RewardReport, ScoreFailed

SCORE_FAILED = float("-inf")

MUTATION_KINDS = ("move-piece", "add-piece", "remove-piece", "replace-piece", "flip-side")

DEFAULT_WEIGHTS = {
    "move-piece": 0.35,
    "remove-piece": 0.20,
    "add-piece": 0.20,
    "replace-piece": 0.15,
    "flip-side": 0.10,
}

_ADDABLE = (PAWN, KNIGHT, BISHOP, ROOK, QUEEN)


@dataclass(frozen=True)
class EvoConfig:
    population: int = 128
    elite: int = 8
    tournament: int = 4
    mutation_weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    mutations_per_child: int = 3
    generations: int = 200
    realism_enforced: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.elite >= self.population:
            raise ValueError("elite must be smaller than the population")
        total = sum(self.mutation_weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mutation weights must sum to 1, got {total}")
        for kind in self.mutation_weights:
            if kind not in MUTATION_KINDS:
                raise ValueError(f"unknown mutation kind {kind!r}")


@dataclass
class GenerationStats:
    round: int
    samples: int
    legal_fraction: float
    mean_reward: float
    max_reward: float
    unique_fraction: float

    def as_dict(self) -> dict:
        return {
            "round": self.round,
            "samples": self.samples,
            "legal_fraction": self.legal_fraction,
            "mean_reward": self.mean_reward,
            "max_reward": self.max_reward,
            "unique_fraction": self.unique_fraction,
        }


def _pick_weighted(rng: random.Random, weights: dict[str, float]) -> str:
    roll = rng.random()
    acc = 0.0
    for kind, w in weights.items():
        acc += w
        if roll < acc:
            return kind
    return next(reversed(weights))


def _apply_edit(board: list[int], side: int, kind: str, rng: random.Random) -> Optional[int]:
    """Edit the board in place; returns the possibly flipped side or None."""
    occupied = [sq for sq in range(64) if board[sq]]
    empty = [sq for sq in range(64) if not board[sq]]
    movable = [sq for sq in occupied]
    removable = [sq for sq in occupied if abs(board[sq]) != KING]

    if kind == "move-piece" and movable and empty:
        frm = rng.choice(movable)
        piece = board[frm]
        targets = empty
        if abs(piece) == PAWN:
            targets = [sq for sq in empty if (sq >> 3) not in (0, 7)]
        if not targets:
            return None
        board[frm] = 0
        board[rng.choice(targets)] = piece
        return side
    if kind == "add-piece" and empty:
        color = rng.choice((1, -1))
        piece_kind = rng.choice(_ADDABLE)
        targets = empty
        if piece_kind == PAWN:
            targets = [sq for sq in empty if (sq >> 3) not in (0, 7)]
        if not targets:
            return None
        board[rng.choice(targets)] = piece_kind * color
        return side
    if kind == "remove-piece" and removable:
        board[rng.choice(removable)] = 0
        return side
    if kind == "replace-piece" and removable:
        sq = rng.choice(removable)
        current = board[sq]
        options = [k for k in _ADDABLE if k != abs(current)]
        if (sq >> 3) in (0, 7):
            options = [k for k in options if k != PAWN]
        if not options:
            return None
        board[sq] = rng.choice(options) * (1 if current > 0 else -1)
        return side
    if kind == "flip-side":
        return -side
    return None


def mutate(
    position: Position, rng: random.Random, config: EvoConfig
) -> tuple[Position, bool]:
    """Apply 1..cap random edits; returns (position, changed).

    Invalid intermediate boards are retried up to 50 times; when nothing
    valid emerges the original position comes back unchanged.
    """
    for _ in range(50):
        board = list(position.board)
        side = position.side
        edits = rng.randint(1, config.mutations_per_child)
        applied = 0
        for _ in range(edits):
            kind = _pick_weighted(rng, config.mutation_weights)
            new_side = _apply_edit(board, side, kind, rng)
            if new_side is not None:
                side = new_side
                applied += 1
        if not applied:
            continue
        candidate = Position(tuple(board), side, castling=0, ep=None)
        if structural_violations(candidate):
            continue
        if config.realism_enforced and validate_realism(candidate):
            continue
        return candidate, True
    return position, False


@dataclass
class Individual:
    position: Position
    fitness: Optional[float] = None
    report: Optional[RewardReport] = None
    born_generation: int = 0

    @property
    def fen(self) -> str:
        return serialize_fen(self.position)


RewardLike = float | RewardReport


def _reward_value(result: RewardLike) -> float:
    return result.reward if isinstance(result, RewardReport) else float(result)


def _is_unique(result: RewardLike) -> bool:
    if isinstance(result, RewardReport):
        return result.uniqueness.unique
    return False


def _child_rng(seed: int, generation: int, slot: int) -> random.Random:
    # Index-derived streams keep parallel evaluation order irrelevant.
    return random.Random((seed * 1_000_003 + generation) * 1_000_003 + slot)


def evolve(
    seeds: list[Position],
    config: EvoConfig,
    reward_fn: Callable[[Position], RewardLike],
    on_generation: Optional[Callable[[GenerationStats], None]] = None,
    eval_many: Optional[Callable[[list[Position], Callable], list]] = None,
) -> tuple[list[Individual], list[GenerationStats]]:
    """Tournament selection with elitism; fitness comes from reward_fn.

    Engine failures mark the individual score-failed (ranked below any
    real reward). Fixed seeds make runs byte-reproducible when the
    scoring callback is itself deterministic. `eval_many` may batch
    fitness evaluation (e.g. over an engine pool); it receives the
    positions plus a per-position scorer and returns results in order.
    """
    if not seeds:
        raise ValueError("need at least one seed position")
    cache: dict[str, tuple[float, Optional[RewardReport]]] = {}
    population = [
        Individual(seeds[i % len(seeds)], born_generation=0)
        for i in range(config.population)
    ]

    def score_one(position: Position):
        try:
            result = reward_fn(position)
        except ScoreFailed:
            return None
        return result

    def evaluate(pending: list[Individual]) -> None:
        jobs = [ind for ind in pending if ind.fitness is None]
        todo, seen = [], set()
        for ind in jobs:
            if ind.fen not in cache and ind.fen not in seen:
                seen.add(ind.fen)
                todo.append(ind.position)
        if todo:
            runner = eval_many or (lambda items, fn: [fn(x) for x in items])
            for position, result in zip(todo, runner(todo, score_one)):
                key = serialize_fen(position)
                if result is None:
                    cache[key] = (SCORE_FAILED, None)
                else:
                    report = result if isinstance(result, RewardReport) else None
                    cache[key] = (_reward_value(result), report)
        for ind in jobs:
            fitness, report = cache[ind.fen]
            ind.fitness = fitness
            ind.report = report

    def rank_key(ind: Individual):
        # Ties favor elders so zero-reward runs keep their seeds in the elite.
        failed = ind.fitness == SCORE_FAILED
        return (
            float("inf") if failed else -(ind.fitness or 0.0),
            ind.born_generation,
            ind.fen,
        )

    stats_log: list[GenerationStats] = []
    for generation in range(config.generations + 1):
        evaluate(population)
        population.sort(key=rank_key)
        scored = [ind for ind in population if ind.fitness != SCORE_FAILED]
        rewards = [ind.fitness for ind in scored]
        uniques = [
            ind for ind in scored if ind.report is not None and ind.report.uniqueness.unique
        ]
        stats = GenerationStats(
            round=generation,
            samples=len(population),
            legal_fraction=len(scored) / len(population),
            mean_reward=(sum(rewards) / len(rewards)) if rewards else 0.0,
            max_reward=max(rewards, default=0.0),
            unique_fraction=len(uniques) / len(population),
        )
        stats_log.append(stats)
        if on_generation:
            on_generation(stats)
        if generation == config.generations:
            break

        children: list[Individual] = []
        for slot in range(config.population - config.elite):
            rng = _child_rng(config.rng_seed, generation, slot)
            contenders = [
                population[rng.randrange(len(population))]
                for _ in range(config.tournament)
            ]
            parent = min(contenders, key=rank_key)
            child_pos, _changed = mutate(parent.position, rng, config)
            children.append(Individual(child_pos, born_generation=generation + 1))
        evaluate(children)
        # Survivors are the best of parents plus children (deduplicated
        # by position), so population quality never regresses and the
        # elite always lives on.
        combined = sorted(population + children, key=rank_key)
        survivors: list[Individual] = []
        seen_fens: set[str] = set()
        for ind in combined:
            if ind.fen in seen_fens:
                continue
            seen_fens.add(ind.fen)
            survivors.append(ind)
            if len(survivors) == config.population:
                break
        if len(survivors) < config.population:
            chosen = {id(ind) for ind in survivors}
            for ind in combined:
                if len(survivors) == config.population:
                    break
                if id(ind) not in chosen:
                    survivors.append(ind)
                    chosen.add(id(ind))
        population = survivors

    population.sort(key=rank_key)
    return population, stats_log
