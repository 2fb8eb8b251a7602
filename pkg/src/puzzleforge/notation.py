"""Standard algebraic notation rendering and parsing over the board kernel."""

from __future__ import annotations

from .board import (
    BISHOP,
    KING,
    KNIGHT,
    PAWN,
    QUEEN,
    ROOK,
    GAME_CHECKMATE,
    Move,
    Position,
    apply_move,
    game_state,
    in_check,
    legal_moves,
    square_name,
)

_LETTERS = {KNIGHT: "N", BISHOP: "B", ROOK: "R", QUEEN: "Q", KING: "K"}
_FROM_LETTERS = {v: k for k, v in _LETTERS.items()}


def san(p: Position, m: Move) -> str:
    """Render a legal move in standard algebraic notation."""
    piece = p.board[m.from_sq]
    kind = abs(piece)
    if kind == KING and abs(m.to_sq - m.from_sq) == 2:
        text = "O-O" if m.to_sq > m.from_sq else "O-O-O"
        return text + _suffix(p, m)

    capture = p.board[m.to_sq] != 0 or (kind == PAWN and p.ep == m.to_sq)
    if kind == PAWN:
        text = ""
        if capture:
            text += square_name(m.from_sq)[0] + "x"
        text += square_name(m.to_sq)
        if m.promotion:
            text += "=" + _LETTERS[m.promotion]
        return text + _suffix(p, m)

    text = _LETTERS[kind]
    # Disambiguate among same-kind pieces that can also reach the target.
    rivals = [
        o
        for o in legal_moves(p)
        if o.to_sq == m.to_sq and o.from_sq != m.from_sq and p.board[o.from_sq] == piece
    ]
    if rivals:
        frm = square_name(m.from_sq)
        if all(square_name(o.from_sq)[0] != frm[0] for o in rivals):
            text += frm[0]
        elif all(square_name(o.from_sq)[1] != frm[1] for o in rivals):
            text += frm[1]
        else:
            text += frm
    if capture:
        text += "x"
    text += square_name(m.to_sq)
    return text + _suffix(p, m)


def _suffix(p: Position, m: Move) -> str:
    nxt = apply_move(p, m, check_legal=False)
    if in_check(nxt):
        return "#" if game_state(nxt) == GAME_CHECKMATE else "+"
    return ""


def parse_san(p: Position, text: str) -> Move:
    """Resolve SAN text (annotations tolerated) to a legal move."""
    cleaned = text.strip().rstrip("!?").rstrip("+#")
    if not cleaned:
        raise ValueError(f"empty SAN {text!r}")
    for m in legal_moves(p):
        rendered = san(p, m)
        if rendered.rstrip("+#") == cleaned:
            return m
    raise ValueError(f"SAN {text!r} matches no legal move in {p.fen()}")


def parse_line(p: Position, sans: list[str]) -> list[Move]:
    """Parse a whole SAN line, applying moves as it goes."""
    moves = []
    for token in sans:
        m = parse_san(p, token)
        moves.append(m)
        p = apply_move(p, m, check_legal=False)
    return moves


def line_san(p: Position, moves: list[Move]) -> list[str]:
    out = []
    for m in moves:
        out.append(san(p, m))
        p = apply_move(p, m, check_legal=False)
    return out
