"""Aesthetic theme detectors over a position and its solution line.

Labels attach to a candidate when a detector fires on the (position,
line) pair, each carrying evidence plies. Structural detectors
(underpromotion, smothered mate, terminal stalemate, switchback, king
tour) are exact; the rest are declared heuristics tuned on the curated
fixture collection. Detectors that can consult an engine accept an
optional pair of handles and degrade gracefully without one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .board import (
    BISHOP,
    KING,
    KNIGHT,
    PAWN,
    QUEEN,
    ROOK,
    GAME_CHECKMATE,
    GAME_STALEMATE,
    KING_ATTACKS,
    PIECE_VALUES,
    Move,
    Position,
    apply_move,
    attackers_of,
    game_state,
    legal_moves,
)
from .rewards import RewardThresholds
from .uci import EngineError, EnginePair

THEMES = (
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

SEE_SACRIFICE_CP = -150
EN_PRISE_VICTIM_CP = 300
EN_PRISE_GAIN_CP = 150
TRAPPED_PIECE_CP = 300
PARALYSIS_MOBILITY = 4
PARALYSIS_DROP_CP = 300
WITHDRAWAL_RETREAT_RANKS = 2
KING_TOUR_MOVES = 3


@dataclass(frozen=True)
class ThemeLabel:
    theme: str
    evidence: tuple[tuple[int, str], ...]

    def as_dict(self) -> dict:
        return {"theme": self.theme, "evidence": [list(e) for e in self.evidence]}

    @classmethod
    def from_dict(cls, d: dict) -> "ThemeLabel":
        return cls(d["theme"], tuple((int(p), t) for p, t in d["evidence"]))


def _value_at(board: tuple[int, ...], sq: int) -> int:
    piece = board[sq]
    return PIECE_VALUES[abs(piece)] if piece else 0


def static_exchange_eval(p: Position, m: Move) -> int:
    """Material outcome of the capture swap-off on the destination square.

    Quiet moves start from zero gain, so parking a piece on a defended
    square scores negative. The mover's own king joins the swap only
    when the opponent has no further attacker.
    """
    board = list(p.board)
    target = m.to_sq
    side = p.side

    victim = _value_at(tuple(board), target)
    if (
        abs(board[m.from_sq]) == PAWN
        and p.ep is not None
        and target == p.ep
        and board[target] == 0
    ):
        victim = PIECE_VALUES[PAWN]
        board[target - 8 * side] = 0

    gain = [victim]
    attacker_value = PIECE_VALUES[abs(board[m.from_sq])]
    board[m.from_sq] = 0
    board[target] = 0  # occupancy only matters for ray scans below

    swapping = -side
    while True:
        attackers = attackers_of(tuple(board), target, swapping)
        if not attackers:
            break
        lva = min(attackers, key=lambda sq: (PIECE_VALUES[abs(board[sq])] or 100_000))
        lva_kind = abs(board[lva])
        if lva_kind == KING:
            # The king may only conclude the swap when nothing answers.
            if attackers_of(tuple(board), target, -swapping):
                break
        gain.append(attacker_value - gain[-1])
        attacker_value = PIECE_VALUES[lva_kind]
        board[lva] = 0
        swapping = -swapping

    for i in range(len(gain) - 1, 0, -1):
        gain[i - 1] = -max(-gain[i - 1], gain[i])
    return gain[0]


def _walk(p: Position, line: Sequence[Move]):
    """Yield (ply index, position before, move, position after)."""
    cur = p
    for i, m in enumerate(line):
        after = apply_move(cur, m, check_legal=False)
        yield i, cur, m, after
        cur = after


def _final_position(p: Position, line: Sequence[Move]) -> Position:
    cur = p
    for m in line:
        cur = apply_move(cur, m, check_legal=False)
    return cur


def _defender_can_win_piece(after: Position, solver: int,
                            min_victim: int, min_gain: int) -> bool:
    """Can the side to move (defender) profitably grab a big solver piece?"""
    for m in legal_moves(after):
        victim = after.board[m.to_sq]
        if victim * solver <= 0:
            continue
        if PIECE_VALUES[abs(victim)] < min_victim:
            continue
        if static_exchange_eval(after, m) >= min_gain:
            return True
    return False


def detect_sacrifice_moves(
    p: Position,
    line: Sequence[Move],
    evals: Optional[Sequence[Optional[int]]] = None,
    thresholds: RewardThresholds = RewardThresholds(),
) -> list[int]:
    """Solver plies that give up material: bad swap-off on the landing
    square, or a big piece deliberately left for the taking."""
    solver = p.side
    draw_seeking = game_state(_final_position(p, line)) == GAME_STALEMATE
    flagged = []
    for i, before, m, after in _walk(p, line):
        if before.side != solver:
            continue
        offered = static_exchange_eval(before, m) <= SEE_SACRIFICE_CP
        if not offered:
            offered = _defender_can_win_piece(
                after, solver, EN_PRISE_VICTIM_CP, EN_PRISE_GAIN_CP
            )
        if offered and _line_eval_ok(evals, i, thresholds, draw_seeking):
            flagged.append(i)
    return flagged


def _line_eval_ok(
    evals: Optional[Sequence[Optional[int]]],
    ply: int,
    thresholds: RewardThresholds,
    draw_seeking: bool,
) -> bool:
    """Sound-sacrifice filter; a line without recorded evals is trusted."""
    if evals is None or ply >= len(evals) or evals[ply] is None:
        return True
    if draw_seeking:
        return -100 <= evals[ply] <= 100
    return evals[ply] >= thresholds.win_cp


def detect_terminal_stalemate(p: Position, line: Sequence[Move]) -> bool:
    return game_state(_final_position(p, line)) == GAME_STALEMATE


def _smothered_mate(p: Position, line: Sequence[Move]) -> Optional[tuple[int, str]]:
    """Knight mate against a king buried behind its own pieces.

    One covered-but-empty flight square is tolerated: the curated
    examples include mates where a single escape square is guarded by a
    pawn while the rest of the king's shelter is self-blocked.
    """
    final = _final_position(p, line)
    if game_state(final) != GAME_CHECKMATE:
        return None
    mated = final.side
    king_sq = final.king_square(mated)
    checkers = attackers_of(final.board, king_sq, -mated)
    if not checkers or any(abs(final.board[sq]) != KNIGHT for sq in checkers):
        return None
    own_blocked = 0
    empty = 0
    for adj in KING_ATTACKS[king_sq]:
        piece = final.board[adj]
        if piece * mated > 0:
            own_blocked += 1
        elif piece == 0:
            empty += 1
        else:
            return None  # a winner piece adjacent: a capture mate, not a burial
    if own_blocked >= 2 and empty <= 1:
        return (len(line) - 1, "knight-mate-flights-self-blocked")
    return None


def _ray_direction(frm: int, to: int) -> Optional[tuple[int, int]]:
    df = (to & 7) - (frm & 7)
    dr = (to >> 3) - (frm >> 3)
    if df == 0 and dr == 0:
        return None
    if df == 0 or dr == 0 or abs(df) == abs(dr):
        return (0 if df == 0 else df // abs(df), 0 if dr == 0 else dr // abs(dr))
    return None


def _squares_between(a: int, b: int) -> Optional[list[int]]:
    d = _ray_direction(a, b)
    if d is None:
        return None
    out = []
    f, r = (a & 7) + d[0], (a >> 3) + d[1]
    while (sq := r * 8 + f) != b:
        if not (0 <= f < 8 and 0 <= r < 8):
            return None
        out.append(sq)
        f += d[0]
        r += d[1]
    return out


def _slider_attacks_along(board: tuple[int, ...], slider_sq: int, target: int) -> bool:
    piece = abs(board[slider_sq])
    d = _ray_direction(slider_sq, target)
    if d is None:
        return False
    diagonal = d[0] != 0 and d[1] != 0
    if diagonal and piece not in (BISHOP, QUEEN):
        return False
    if not diagonal and piece not in (ROOK, QUEEN):
        return False
    between = _squares_between(slider_sq, target)
    return between is not None and all(board[sq] == 0 for sq in between)


def _defender_sliders_attacking(after: Position, target: int, solver: int) -> list[int]:
    out = []
    for sq in range(64):
        piece = after.board[sq]
        if piece * solver >= 0 or abs(piece) not in (BISHOP, ROOK, QUEEN):
            continue
        if _slider_attacks_along(after.board, sq, target):
            out.append(sq)
    return out


def _novotny_plies(
    p: Position,
    line: Sequence[Move],
    probes: Optional[EnginePair],
    thresholds: RewardThresholds,
) -> list[tuple[int, str]]:
    """Sacrifice on the crossing point of two defender sliders' lines."""
    solver = p.side
    hits = []
    for i, before, m, after in _walk(p, line):
        if before.side != solver:
            continue
        sliders = _defender_sliders_attacking(after, m.to_sq, solver)
        directions = {_ray_direction(sq, m.to_sq) for sq in sliders}
        if len(sliders) < 2 or len(directions) < 2:
            continue
        if static_exchange_eval(before, m) > SEE_SACRIFICE_CP:
            continue
        if probes is not None and not _both_recaptures_still_win(
            after, m.to_sq, sliders, probes, thresholds
        ):
            continue
        hits.append((i, "two-slider-crossing-sacrifice"))
    return hits


def _both_recaptures_still_win(
    after: Position,
    target: int,
    sliders: list[int],
    probes: EnginePair,
    thresholds: RewardThresholds,
) -> bool:
    solver = -after.side
    checked = 0
    for slider_sq in sliders[:2]:
        recapture = next(
            (m for m in legal_moves(after) if m.from_sq == slider_sq and m.to_sq == target),
            None,
        )
        if recapture is None:
            continue
        try:
            lines = probes.strong.analyse(apply_move(after, recapture, check_legal=False),
                                          multipv=1)
        except (EngineError, ValueError):
            return False
        solver_eval = lines[0].eval_cp if lines[0].move else 0
        # Eval is from the defender's perspective after the recapture.
        if -solver_eval < thresholds.win_cp:
            return False
        checked += 1
    return checked > 0


def _interference_plies(p: Position, line: Sequence[Move]) -> list[tuple[int, str]]:
    """Solver move landing between a defender slider and a defender piece."""
    solver = p.side
    hits = []
    for i, before, m, after in _walk(p, line):
        if before.side != solver:
            continue
        target = m.to_sq
        for slider_sq in range(64):
            piece = after.board[slider_sq]
            if piece * solver >= 0 or abs(piece) not in (BISHOP, ROOK, QUEEN):
                continue
            d = _ray_direction(slider_sq, target)
            if d is None or not _slider_attacks_along(after.board, slider_sq, target):
                continue
            # Continue past the landing square to the first piece beyond.
            f, r = (target & 7) + d[0], (target >> 3) + d[1]
            while 0 <= f < 8 and 0 <= r < 8:
                beyond = after.board[r * 8 + f]
                if beyond:
                    if beyond * solver < 0:  # another defender piece cut off
                        hits.append((i, "blocks-defender-line"))
                    break
                f += d[0]
                r += d[1]
            else:
                continue
            if hits and hits[-1][0] == i:
                break
    return hits


def _unprotected_plies(
    p: Position,
    line: Sequence[Move],
    evals: Optional[Sequence[Optional[int]]],
    thresholds: RewardThresholds,
) -> list[tuple[int, str]]:
    """Quiet solver move leaving a heavy solver piece hanging yet sound."""
    solver = p.side
    hits = []
    for i, before, m, after in _walk(p, line):
        if before.side != solver:
            continue
        if before.board[m.to_sq] != 0:  # capture: not a quiet offer
            continue
        hanging = False
        for reply in legal_moves(after):
            victim = after.board[reply.to_sq]
            if victim * solver <= 0 or abs(victim) not in (ROOK, QUEEN):
                continue
            if static_exchange_eval(after, reply) >= EN_PRISE_VICTIM_CP:
                hanging = True
                break
        if hanging and _line_eval_ok(evals, i, thresholds, draw_seeking=False):
            hits.append((i, "heavy-piece-left-hanging"))
    return hits


def _xray_plies(p: Position, line: Sequence[Move]) -> list[tuple[int, str]]:
    """Solver slider aligned through one piece to a bigger prize behind it."""
    solver = p.side
    hits = []
    for i, before, m, after in _walk(p, line):
        if before.side != solver:
            continue
        found = False
        for sq in range(64):
            piece = after.board[sq]
            if piece * solver <= 0 or abs(piece) not in (BISHOP, ROOK, QUEEN):
                continue
            for d in _slider_directions(abs(piece)):
                ray = _scan_ray(after.board, sq, d)
                if len(ray) < 2:
                    continue
                first_sq, second_sq = ray[0], ray[1]
                first, second = after.board[first_sq], after.board[second_sq]
                if first * solver >= 0:
                    continue  # the screen must be a defender piece
                if second * solver > 0:
                    hits.append((i, "defends-through-enemy-piece"))
                    found = True
                elif (
                    second * solver < 0
                    and PIECE_VALUES[abs(second)] > PIECE_VALUES[abs(first)]
                ):
                    hits.append((i, "attack-through-screen-to-bigger-target"))
                    found = True
                if found:
                    break
            if found:
                break
    return hits


def _slider_directions(kind: int) -> list[tuple[int, int]]:
    dirs = []
    if kind in (ROOK, QUEEN):
        dirs += [(0, 1), (1, 0), (0, -1), (-1, 0)]
    if kind in (BISHOP, QUEEN):
        dirs += [(1, 1), (1, -1), (-1, -1), (-1, 1)]
    return dirs


def _scan_ray(board: tuple[int, ...], frm: int, d: tuple[int, int]) -> list[int]:
    """First two occupied squares along d from frm."""
    out = []
    f, r = (frm & 7) + d[0], (frm >> 3) + d[1]
    while 0 <= f < 8 and 0 <= r < 8 and len(out) < 2:
        sq = r * 8 + f
        if board[sq]:
            out.append(sq)
        f += d[0]
        r += d[1]
    return out


def _withdrawal_plies(
    p: Position,
    line: Sequence[Move],
    evals: Optional[Sequence[Optional[int]]],
    thresholds: RewardThresholds,
) -> list[tuple[int, str]]:
    solver = p.side
    back_rank = 7 if solver > 0 else 0  # defender's home rank
    hits = []
    for i, before, m, after in _walk(p, line):
        if before.side != solver:
            continue
        kind = abs(before.board[m.from_sq])
        if kind not in (KNIGHT, BISHOP, ROOK, QUEEN):
            continue
        if before.board[m.to_sq] != 0:
            continue
        dist_from = abs((m.from_sq >> 3) - back_rank)
        dist_to = abs((m.to_sq >> 3) - back_rank)
        if dist_to - dist_from < WITHDRAWAL_RETREAT_RANKS:
            continue
        was_attacked = bool(attackers_of(before.board, m.from_sq, -solver))
        if was_attacked or _line_eval_ok(evals, i, thresholds, draw_seeking=False):
            hits.append((i, "retreats-from-the-front"))
    return hits


def _knight_rim_plies(
    p: Position,
    line: Sequence[Move],
    evals: Optional[Sequence[Optional[int]]],
    thresholds: RewardThresholds,
) -> list[tuple[int, str]]:
    solver = p.side
    hits = []
    for i, before, m, _after in _walk(p, line):
        if before.side != solver or abs(before.board[m.from_sq]) != KNIGHT:
            continue
        file, rank = m.to_sq & 7, m.to_sq >> 3
        if file in (0, 7) or rank in (0, 7):
            if _line_eval_ok(evals, i, thresholds, draw_seeking=False):
                hits.append((i, "knight-to-the-rim"))
    return hits


def _piece_trapped(p: Position, sq: int) -> bool:
    moves = [m for m in legal_moves(p) if m.from_sq == sq]
    if not moves:
        return False
    return all(static_exchange_eval(p, m) <= SEE_SACRIFICE_CP for m in moves)


def _paralysis_evidence(
    p: Position,
    line: Sequence[Move],
    probes: Optional[EnginePair],
    thresholds: RewardThresholds,
) -> Optional[tuple[int, str]]:
    solver = p.side
    final = _final_position(p, line)
    last = len(line) - 1
    if final.side == -solver:
        mobility = len(legal_moves(final))
        if mobility <= PARALYSIS_MOBILITY:
            return (last, f"defender-mobility-{mobility}")
        for sq in range(64):
            piece = final.board[sq]
            if piece * solver < 0 and PIECE_VALUES[abs(piece)] >= TRAPPED_PIECE_CP:
                if _piece_trapped(final, sq):
                    return (last, "defender-piece-trapped")
        if probes is not None:
            if _every_reply_collapses(final, probes, thresholds):
                return (last, "every-reply-collapses")
    return None


def _every_reply_collapses(
    final: Position, probes: EnginePair, thresholds: RewardThresholds
) -> bool:
    try:
        base = probes.weak.analyse(final, multipv=1)[0].eval_cp
        for reply in legal_moves(final):
            after = apply_move(final, reply, check_legal=False)
            if game_state(after) != "ongoing":
                return False
            lines = probes.weak.analyse(after, multipv=1)
            if -(lines[0].eval_cp) > base - PARALYSIS_DROP_CP:
                return False
    except (EngineError, ValueError):
        return False
    return True


def _bristol_plies(p: Position, line: Sequence[Move]) -> list[tuple[int, str]]:
    """A slider clears along a ray; a mate piece later lands behind it."""
    solver = p.side
    sliders: list[tuple[int, int, tuple[int, int], int]] = []  # ply, dest, dir, from
    hits = []
    for i, before, m, _after in _walk(p, line):
        if before.side != solver:
            continue
        kind = abs(before.board[m.from_sq])
        if kind not in (BISHOP, ROOK, QUEEN):
            continue
        d = _ray_direction(m.from_sq, m.to_sq)
        if d is None:
            continue
        for lead_ply, lead_dest, lead_dir, lead_from in sliders:
            if m.to_sq == lead_dest:
                continue
            along = _ray_direction(m.to_sq, lead_dest)
            if along != lead_dir:
                continue  # follower must sit behind the leader on its ray
            diagonal = lead_dir[0] != 0 and lead_dir[1] != 0
            if diagonal and kind not in (BISHOP, QUEEN):
                continue
            if not diagonal and kind not in (ROOK, QUEEN):
                continue
            hits.append((lead_ply, "clearing-move"))
            hits.append((i, "follower-behind-on-ray"))
            return hits
        sliders.append((i, m.to_sq, d, m.from_sq))
    return hits


def _king_tour(p: Position, line: Sequence[Move]) -> Optional[list[tuple[int, str]]]:
    solver = p.side
    moves = [
        (i, m)
        for i, before, m, _after in _walk(p, line)
        if before.side == solver and abs(before.board[m.from_sq]) == KING
    ]
    if len(moves) >= KING_TOUR_MOVES:
        return [(i, "king-step") for i, _m in moves]
    return None


def _switchback(p: Position, line: Sequence[Move]) -> Optional[list[tuple[int, str]]]:
    solver = p.side
    history: dict[int, list[int]] = {}
    for i, before, m, _after in _walk(p, line):
        if before.side != solver:
            # Defender captures delete solver trails on that square.
            history.pop(m.to_sq, None)
            continue
        trail = history.pop(m.from_sq, [m.from_sq])
        if m.to_sq in trail:
            return [(i, "returns-to-earlier-square")]
        history[m.to_sq] = trail + [m.to_sq]
    return None


def detect_themes(
    position: Position,
    line: Sequence[Move],
    probes: Optional[EnginePair] = None,
    thresholds: RewardThresholds = RewardThresholds(),
    evals: Optional[Sequence[Optional[int]]] = None,
) -> list[ThemeLabel]:
    """Run every detector; labels in canonical theme order."""
    if not line:
        return []
    labels: list[ThemeLabel] = []

    def add(theme: str, evidence):
        if evidence:
            labels.append(ThemeLabel(theme, tuple(evidence)))

    sac_plies = detect_sacrifice_moves(position, line, evals, thresholds)
    add("sacrifice", [(i, "material-offered") for i in sac_plies])

    promo = [
        (i, "promotes-to-minor-or-rook")
        for i, before, m, _a in _walk(position, line)
        if before.side == position.side and m.promotion in (KNIGHT, BISHOP, ROOK)
    ]
    add("underpromotion", promo)

    add("attacking-withdrawal", _withdrawal_plies(position, line, evals, thresholds))
    add("knight-on-rim", _knight_rim_plies(position, line, evals, thresholds))

    if detect_terminal_stalemate(position, line) and sac_plies:
        add(
            "stalemate-sacrifice",
            [(len(line) - 1, "ends-stalemate")] + [(i, "material-offered") for i in sac_plies],
        )

    add("novotny", _novotny_plies(position, line, probes, thresholds))
    add("interference", _interference_plies(position, line))
    add("unprotected-position", _unprotected_plies(position, line, evals, thresholds))
    add("xray", _xray_plies(position, line))

    paralysis = _paralysis_evidence(position, line, probes, thresholds)
    add("paralysis", [paralysis] if paralysis else None)

    add("bristol", _bristol_plies(position, line))

    tour = _king_tour(position, line)
    add("king-on-tour", tour)

    switch = _switchback(position, line)
    add("switchback", switch)

    smother = _smothered_mate(position, line)
    add("smothered-mate", [smother] if smother else None)

    order = {t: i for i, t in enumerate(THEMES)}
    labels.sort(key=lambda lab: order[lab.theme])
    return labels
