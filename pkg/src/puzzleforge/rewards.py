"""Two-part puzzle reward: unique winning move, gated by how hard the
winning move is for a shallow engine to see.

The uniqueness gate demands that the best move clearly wins while the
second-best does not come close. The counter-intuitiveness score is the
fraction of shallow search depths at which the weak engine prefers some
other move. A candidate that fails uniqueness is worth nothing no matter
how tricky it is, so the combination is gated rather than weighted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .board import (
    GAME_CHECKMATE,
    GAME_STALEMATE,
    Move,
    Position,
    apply_move,
    game_state,
    legal_moves,
    material_balance,
    parse_uci_move,
)
from .uci import MATE_BASE, EngineError, EngineHandle, EnginePair

REASON_NO_WINNING_MOVE = "no-winning-move"
REASON_SECOND_ALSO_WINS = "second-also-wins"
REASON_GAP_TOO_SMALL = "gap-too-small"


class ScoreFailed(Exception):
    """Engine infrastructure failed; the candidate must not be ranked."""


@dataclass(frozen=True)
class RewardThresholds:
    win_cp: int = 200          # best move must be at least this good
    second_max_cp: int = 100   # second-best must not exceed this
    gap_cp: int = 200          # and must trail the best by at least this
    weak_depth: int = 4        # counter-intuitiveness probes depths 1..weak_depth
    convert_eval_cp: int = 400     # line verification stops once clearly converted
    convert_material_cp: int = 200


@dataclass(frozen=True)
class UniquenessResult:
    unique: bool
    winning_move: Optional[Move]
    best_eval: int
    second_eval: int
    reason_failed: Optional[str] = None
    pv: tuple[Move, ...] = ()

    def as_dict(self) -> dict:
        return {
            "unique": self.unique,
            "winning_move": self.winning_move.uci() if self.winning_move else None,
            "best_eval": self.best_eval,
            "second_eval": self.second_eval,
            "reason_failed": self.reason_failed,
            "pv": [m.uci() for m in self.pv],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UniquenessResult":
        return cls(
            unique=d["unique"],
            winning_move=parse_uci_move(d["winning_move"]) if d.get("winning_move") else None,
            best_eval=d["best_eval"],
            second_eval=d["second_eval"],
            reason_failed=d.get("reason_failed"),
            pv=tuple(parse_uci_move(u) for u in d.get("pv", [])),
        )


@dataclass(frozen=True)
class RewardReport:
    uniqueness: UniquenessResult
    ci_score: float
    reward: float
    solution_line: tuple[Move, ...] = ()
    line_verified_plies: int = 0

    def as_dict(self) -> dict:
        return {
            "uniqueness": self.uniqueness.as_dict(),
            "ci_score": self.ci_score,
            "reward": self.reward,
            "solution_line": [m.uci() for m in self.solution_line],
            "line_verified_plies": self.line_verified_plies,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardReport":
        return cls(
            uniqueness=UniquenessResult.from_dict(d["uniqueness"]),
            ci_score=d["ci_score"],
            reward=d["reward"],
            solution_line=tuple(parse_uci_move(u) for u in d.get("solution_line", [])),
            line_verified_plies=d.get("line_verified_plies", 0),
        )


def uniqueness_check(
    strong: EngineHandle,
    position: Position,
    thresholds: RewardThresholds = RewardThresholds(),
    depth: Optional[int] = None,
) -> UniquenessResult:
    """Decide whether the position has exactly one clearly winning move."""
    moves = legal_moves(position)
    if not moves:
        raise ValueError(f"terminal position {position.fen()}")
    try:
        if len(moves) == 1:
            lines = strong.analyse(position, depth=depth, multipv=1)
            only = lines[0]
            # A forced single move is no puzzle unless it simply mates.
            if only.is_mate_score and only.eval_cp > 0:
                return UniquenessResult(True, only.move, only.eval_cp, -MATE_BASE, pv=only.pv)
            return UniquenessResult(
                False, None, only.eval_cp, -MATE_BASE, REASON_NO_WINNING_MOVE, pv=only.pv
            )
        lines = strong.analyse(position, depth=depth, multipv=2)
    except EngineError as exc:
        raise ScoreFailed(str(exc)) from exc

    best = lines[0]
    second = lines[1] if len(lines) > 1 else None
    second_eval = second.eval_cp if second else -MATE_BASE
    if best.eval_cp < thresholds.win_cp:
        return UniquenessResult(
            False, None, best.eval_cp, second_eval, REASON_NO_WINNING_MOVE, pv=best.pv
        )
    if second_eval > thresholds.second_max_cp:
        return UniquenessResult(
            False, None, best.eval_cp, second_eval, REASON_SECOND_ALSO_WINS, pv=best.pv
        )
    if best.eval_cp - second_eval < thresholds.gap_cp:
        return UniquenessResult(
            False, None, best.eval_cp, second_eval, REASON_GAP_TOO_SMALL, pv=best.pv
        )
    return UniquenessResult(True, best.move, best.eval_cp, second_eval, pv=best.pv)


def counter_intuitive_score(
    weak: EngineHandle,
    position: Position,
    winning_move: Move,
    thresholds: RewardThresholds = RewardThresholds(),
) -> float:
    """Fraction of shallow depths whose preferred move misses the win."""
    misses = 0
    try:
        for d in range(1, thresholds.weak_depth + 1):
            lines = weak.analyse(position, depth=d, multipv=1)
            if lines[0].move != winning_move:
                misses += 1
    except EngineError as exc:
        raise ScoreFailed(str(exc)) from exc
    return misses / thresholds.weak_depth


def reward(
    pair: EnginePair,
    position: Position,
    thresholds: RewardThresholds = RewardThresholds(),
    verify_plies: int = 0,
) -> RewardReport:
    """Gated reward: zero unless unique, else the counter-intuitiveness score.

    With verify_plies > 0 the solution line is walked and re-checked for
    solver-move uniqueness (line mode); otherwise the strong engine's PV
    is reported as the line (root mode).
    """
    uniq = uniqueness_check(pair.strong, position, thresholds)
    if not uniq.unique:
        return RewardReport(uniq, 0.0, 0.0, solution_line=(), line_verified_plies=0)
    ci = counter_intuitive_score(pair.weak, position, uniq.winning_move, thresholds)
    if verify_plies > 0:
        verified, line = verify_solution_line(pair, position, verify_plies, thresholds)
        return RewardReport(uniq, ci, ci, tuple(line), verified)
    return RewardReport(uniq, ci, ci, uniq.pv, 0)


def verify_solution_line(
    pair: EnginePair,
    position: Position,
    max_solver_plies: int,
    thresholds: RewardThresholds = RewardThresholds(),
) -> tuple[int, list[Move]]:
    """Walk the solution, demanding a unique solver move at every turn.

    Defender replies are the strong engine's first choice. Verification
    ends early when the game ends or the solver has clearly converted
    (large eval with a material cushion). Returns the number of verified
    solver plies and the full line including defender replies.
    """
    line: list[Move] = []
    verified = 0
    current = position
    for ply_index in range(max_solver_plies):
        if game_state(current) in (GAME_CHECKMATE, GAME_STALEMATE):
            break
        uniq = uniqueness_check(pair.strong, current, thresholds)
        if not uniq.unique:
            # Either the solver has converted (many ways win now) or the
            # line is not verifiable past this point; stop either way.
            break
        line.append(uniq.winning_move)
        verified += 1
        current = apply_move(current, uniq.winning_move, check_legal=False)
        if game_state(current) in (GAME_CHECKMATE, GAME_STALEMATE):
            break
        if verified == max_solver_plies:
            break
        try:
            reply = pair.strong.analyse(current, multipv=1)[0].move
        except EngineError as exc:
            raise ScoreFailed(str(exc)) from exc
        line.append(reply)
        current = apply_move(current, reply, check_legal=False)
    return verified, line


def converted(position: Position, best_eval: int, thresholds: RewardThresholds) -> bool:
    """Clearly winning with a material cushion; line verification may stop."""
    return (
        best_eval >= thresholds.convert_eval_cp
        and material_balance(position) >= thresholds.convert_material_cp
    )
