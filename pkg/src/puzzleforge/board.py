"""Chess domain kernel: FEN handling, move generation, terminal states.

Positions are immutable values; every operation returns a new Position.
Squares are 0..63 with a1=0, h1=7, a8=56, h8=63. Piece codes are signed
ints: positive white, negative black, magnitude in PAWN..KING.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

PAWN, KNIGHT, BISHOP, ROOK, QUEEN, KING = 1, 2, 3, 4, 5, 6

WHITE = 1
BLACK = -1

PIECE_CHARS = {PAWN: "p", KNIGHT: "n", BISHOP: "b", ROOK: "r", QUEEN: "q", KING: "k"}
CHAR_PIECES = {c: p for p, c in PIECE_CHARS.items()}

PIECE_VALUES = {PAWN: 100, KNIGHT: 320, BISHOP: 330, ROOK: 500, QUEEN: 900, KING: 0}

# Castling rights bitmask.
CASTLE_WK, CASTLE_WQ, CASTLE_BK, CASTLE_BQ = 1, 2, 4, 8

FILES = "abcdefgh"


class MalformedFen(ValueError):
    """FEN text that cannot be decoded into a board at all."""


class IllegalPosition(ValueError):
    """Structurally decodable position that violates a board invariant."""

    def __init__(self, violations: list[str]):
        super().__init__("illegal position: " + ", ".join(violations))
        self.violations = violations


class IllegalMove(ValueError):
    """Move not legal in the given position."""


def square(file: int, rank: int) -> int:
    return rank * 8 + file


def square_name(sq: int) -> str:
    return FILES[sq & 7] + str((sq >> 3) + 1)


def parse_square(name: str) -> int:
    if len(name) != 2 or name[0] not in FILES or name[1] not in "12345678":
        raise ValueError(f"bad square {name!r}")
    return square(FILES.index(name[0]), int(name[1]) - 1)


@dataclass(frozen=True, order=True)
class Move:
    from_sq: int
    to_sq: int
    promotion: Optional[int] = None

    def uci(self) -> str:
        suffix = PIECE_CHARS[self.promotion] if self.promotion else ""
        return square_name(self.from_sq) + square_name(self.to_sq) + suffix

    def __repr__(self) -> str:
        return f"Move({self.uci()})"

    def _sort_key(self) -> tuple[int, int, int]:
        return (self.from_sq, self.to_sq, self.promotion or 0)


def parse_uci_move(text: str) -> Move:
    text = text.strip()
    if len(text) not in (4, 5):
        raise ValueError(f"bad uci move {text!r}")
    frm = parse_square(text[:2])
    to = parse_square(text[2:4])
    promo = None
    if len(text) == 5:
        ch = text[4].lower()
        if ch not in "nbrq":
            raise ValueError(f"bad promotion {text!r}")
        promo = CHAR_PIECES[ch]
    return Move(frm, to, promo)


# Precomputed jump tables.
def _jump_table(deltas: tuple[tuple[int, int], ...]) -> tuple[tuple[int, ...], ...]:
    table = []
    for sq in range(64):
        f, r = sq & 7, sq >> 3
        dests = tuple(
            square(f + df, r + dr)
            for df, dr in deltas
            if 0 <= f + df < 8 and 0 <= r + dr < 8
        )
        table.append(dests)
    return tuple(table)


KNIGHT_DELTAS = ((1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2))
KING_DELTAS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))
KNIGHT_ATTACKS = _jump_table(KNIGHT_DELTAS)
KING_ATTACKS = _jump_table(KING_DELTAS)

ROOK_DIRS = ((0, 1), (1, 0), (0, -1), (-1, 0))
BISHOP_DIRS = ((1, 1), (1, -1), (-1, -1), (-1, 1))


def _ray_table(dirs: tuple[tuple[int, int], ...]) -> tuple[tuple[tuple[int, ...], ...], ...]:
    table = []
    for sq in range(64):
        f, r = sq & 7, sq >> 3
        rays = []
        for df, dr in dirs:
            ray = []
            nf, nr = f + df, r + dr
            while 0 <= nf < 8 and 0 <= nr < 8:
                ray.append(square(nf, nr))
                nf += df
                nr += dr
            rays.append(tuple(ray))
        table.append(tuple(rays))
    return tuple(table)


ROOK_RAYS = _ray_table(ROOK_DIRS)
BISHOP_RAYS = _ray_table(BISHOP_DIRS)


@dataclass(frozen=True)
class Position:
    """Immutable full board state."""

    board: tuple[int, ...]
    side: int  # WHITE or BLACK
    castling: int = 0
    ep: Optional[int] = None
    halfmove: int = 0
    fullmove: int = 1

    def piece_at(self, sq: int) -> int:
        return self.board[sq]

    def king_square(self, color: int) -> Optional[int]:
        target = KING * color
        for sq in range(64):
            if self.board[sq] == target:
                return sq
        return None

    def pieces(self) -> Iterator[tuple[int, int]]:
        """Yield (square, signed piece) for every occupied square."""
        for sq in range(64):
            p = self.board[sq]
            if p:
                yield sq, p

    def fen(self) -> str:
        return serialize_fen(self)

    def __repr__(self) -> str:
        return f"Position({self.fen()!r})"


def attackers_of(board: tuple[int, ...], sq: int, by: int) -> list[int]:
    """Squares of `by`-colored pieces attacking `sq`."""
    found = []
    f, r = sq & 7, sq >> 3
    # Pawns: a white pawn attacks from one rank below.
    pr = r - by
    if 0 <= pr < 8:
        for pf in (f - 1, f + 1):
            if 0 <= pf < 8 and board[square(pf, pr)] == PAWN * by:
                found.append(square(pf, pr))
    for s in KNIGHT_ATTACKS[sq]:
        if board[s] == KNIGHT * by:
            found.append(s)
    for s in KING_ATTACKS[sq]:
        if board[s] == KING * by:
            found.append(s)
    for ray in ROOK_RAYS[sq]:
        for s in ray:
            p = board[s]
            if p:
                if p == ROOK * by or p == QUEEN * by:
                    found.append(s)
                break
    for ray in BISHOP_RAYS[sq]:
        for s in ray:
            p = board[s]
            if p:
                if p == BISHOP * by or p == QUEEN * by:
                    found.append(s)
                break
    return found


def is_attacked(board: tuple[int, ...], sq: int, by: int) -> bool:
    f, r = sq & 7, sq >> 3
    pr = r - by
    if 0 <= pr < 8:
        for pf in (f - 1, f + 1):
            if 0 <= pf < 8 and board[square(pf, pr)] == PAWN * by:
                return True
    kn = KNIGHT * by
    for s in KNIGHT_ATTACKS[sq]:
        if board[s] == kn:
            return True
    kg = KING * by
    for s in KING_ATTACKS[sq]:
        if board[s] == kg:
            return True
    rk, qn, bs = ROOK * by, QUEEN * by, BISHOP * by
    for ray in ROOK_RAYS[sq]:
        for s in ray:
            p = board[s]
            if p:
                if p == rk or p == qn:
                    return True
                break
    for ray in BISHOP_RAYS[sq]:
        for s in ray:
            p = board[s]
            if p:
                if p == bs or p == qn:
                    return True
                break
    return False


def in_check(p: Position, color: Optional[int] = None) -> bool:
    color = p.side if color is None else color
    ks = p.king_square(color)
    if ks is None:
        return False
    return is_attacked(p.board, ks, -color)


def structural_violations(p: Position) -> list[str]:
    """Board-invariant violations (the Position invariants)."""
    v = []
    wk = sum(1 for s in range(64) if p.board[s] == KING)
    bk = sum(1 for s in range(64) if p.board[s] == -KING)
    if wk != 1:
        v.append("multiple-kings" if wk > 1 else "missing-king")
    if bk != 1:
        v.append("multiple-kings" if bk > 1 else "missing-king")
    for sq in range(64):
        piece = p.board[sq]
        if abs(piece) == PAWN and (sq >> 3) in (0, 7):
            v.append("pawn-on-back-rank")
            break
    if wk == 1 and bk == 1:
        wks = p.king_square(WHITE)
        bks = p.king_square(BLACK)
        if bks in KING_ATTACKS[wks]:
            v.append("adjacent-kings")
        elif in_check(p, -p.side):
            v.append("non-mover-in-check")
    # Castling rights require king and rook on their origin squares.
    reqs = (
        (CASTLE_WK, 4, KING, 7, ROOK),
        (CASTLE_WQ, 4, KING, 0, ROOK),
        (CASTLE_BK, 60, -KING, 63, -ROOK),
        (CASTLE_BQ, 60, -KING, 56, -ROOK),
    )
    for flag, ksq, kp, rsq, rp in reqs:
        if p.castling & flag and (p.board[ksq] != kp or p.board[rsq] != rp):
            v.append("castling-rights-inconsistent")
            break
    return v


_INITIAL_COUNTS = {PAWN: 8, KNIGHT: 2, BISHOP: 2, ROOK: 2, QUEEN: 1, KING: 1}


def validate_realism(p: Position) -> list[str]:
    """Invariant violations plus promotion-consistency piece-count checks.

    Empty list means the position both satisfies the board invariants and
    could plausibly arise from a real game's material (extra pieces beyond
    the initial army must be covered by missing pawns).
    """
    v = structural_violations(p)
    for color, tag in ((WHITE, "white"), (BLACK, "black")):
        counts = {k: 0 for k in _INITIAL_COUNTS}
        for sq in range(64):
            piece = p.board[sq]
            if piece * color > 0:
                counts[abs(piece)] += 1
        if counts[PAWN] > 8:
            v.append(f"too-many-pawns-{tag}")
        extras = sum(
            max(0, counts[k] - _INITIAL_COUNTS[k])
            for k in (KNIGHT, BISHOP, ROOK, QUEEN)
        )
        missing_pawns = max(0, 8 - counts[PAWN])
        if extras > missing_pawns:
            v.append(f"promotion-inconsistent-{tag}")
        if sum(counts.values()) > 16:
            v.append(f"too-many-pieces-{tag}")
    return v


def parse_fen(text: str, strict: bool = True) -> Position:
    """Decode a FEN record of 2, 4 or 6 fields.

    Missing fields default to castling "-", en passant "-", halfmove 0,
    fullmove 1 (generated and booklet FENs carry only board and side).
    With strict=True a position violating board invariants raises
    IllegalPosition; strict=False returns it for later inspection.
    """
    fields = text.split()
    if len(fields) not in (2, 4, 6):
        raise MalformedFen(f"expected 2, 4 or 6 FEN fields, got {len(fields)}")

    ranks = fields[0].split("/")
    if len(ranks) != 8:
        raise MalformedFen(f"expected 8 ranks, got {len(ranks)}")
    board = [0] * 64
    for i, row in enumerate(ranks):
        rank = 7 - i
        file = 0
        for ch in row:
            if ch.isdigit():
                if ch == "0" or ch == "9":
                    raise MalformedFen(f"bad skip digit {ch!r} in rank {row!r}")
                file += int(ch)
            else:
                piece = CHAR_PIECES.get(ch.lower())
                if piece is None:
                    raise MalformedFen(f"unknown piece letter {ch!r}")
                if file > 7:
                    raise MalformedFen(f"rank overflow in {row!r}")
                board[square(file, rank)] = piece if ch.isupper() else -piece
                file += 1
        if file != 8:
            raise MalformedFen(f"rank {row!r} has {file} files, expected 8")

    if fields[1] not in ("w", "b"):
        raise MalformedFen(f"bad side-to-move {fields[1]!r}")
    side = WHITE if fields[1] == "w" else BLACK

    castling = 0
    if len(fields) >= 4 and fields[2] != "-":
        flags = {"K": CASTLE_WK, "Q": CASTLE_WQ, "k": CASTLE_BK, "q": CASTLE_BQ}
        for ch in fields[2]:
            if ch not in flags:
                raise MalformedFen(f"bad castling field {fields[2]!r}")
            castling |= flags[ch]

    ep = None
    if len(fields) >= 4 and fields[3] != "-":
        try:
            ep = parse_square(fields[3])
        except ValueError as exc:
            raise MalformedFen(f"bad en-passant field {fields[3]!r}") from exc

    halfmove, fullmove = 0, 1
    if len(fields) == 6:
        try:
            halfmove, fullmove = int(fields[4]), int(fields[5])
        except ValueError as exc:
            raise MalformedFen(f"bad clock fields {fields[4]!r} {fields[5]!r}") from exc
        if halfmove < 0 or fullmove < 1:
            raise MalformedFen("negative clock fields")

    pos = Position(tuple(board), side, castling, ep, halfmove, fullmove)
    if strict:
        violations = structural_violations(pos)
        if violations:
            raise IllegalPosition(violations)
    return pos


def serialize_fen(p: Position) -> str:
    """Canonical 6-field FEN; parse_fen(serialize_fen(p)) == p."""
    rows = []
    for rank in range(7, -1, -1):
        row = ""
        empty = 0
        for file in range(8):
            piece = p.board[square(file, rank)]
            if piece == 0:
                empty += 1
            else:
                if empty:
                    row += str(empty)
                    empty = 0
                ch = PIECE_CHARS[abs(piece)]
                row += ch.upper() if piece > 0 else ch
        if empty:
            row += str(empty)
        rows.append(row)
    castling = ""
    for flag, ch in ((CASTLE_WK, "K"), (CASTLE_WQ, "Q"), (CASTLE_BK, "k"), (CASTLE_BQ, "q")):
        if p.castling & flag:
            castling += ch
    return " ".join(
        (
            "/".join(rows),
            "w" if p.side == WHITE else "b",
            castling or "-",
            square_name(p.ep) if p.ep is not None else "-",
            str(p.halfmove),
            str(p.fullmove),
        )
    )


STARTING_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"


def starting_position() -> Position:
    return parse_fen(STARTING_FEN)


def _pseudo_moves(p: Position) -> list[Move]:
    board = p.board
    side = p.side
    moves: list[Move] = []
    promo_rank = 7 if side == WHITE else 0
    for frm in range(64):
        piece = board[frm]
        if piece * side <= 0:
            continue
        kind = abs(piece)
        if kind == PAWN:
            f, r = frm & 7, frm >> 3
            step = frm + 8 * side
            if 0 <= step < 64 and board[step] == 0:
                if step >> 3 == promo_rank:
                    for pr in (QUEEN, ROOK, BISHOP, KNIGHT):
                        moves.append(Move(frm, step, pr))
                else:
                    moves.append(Move(frm, step))
                    start_rank = 1 if side == WHITE else 6
                    double = frm + 16 * side
                    if r == start_rank and board[double] == 0:
                        moves.append(Move(frm, double))
            for df in (-1, 1):
                nf = f + df
                if not 0 <= nf < 8:
                    continue
                to = square(nf, r + side)
                if not 0 <= to < 64:
                    continue
                if board[to] * side < 0:
                    if to >> 3 == promo_rank:
                        for pr in (QUEEN, ROOK, BISHOP, KNIGHT):
                            moves.append(Move(frm, to, pr))
                    else:
                        moves.append(Move(frm, to))
                elif p.ep is not None and to == p.ep:
                    moves.append(Move(frm, to))
        elif kind == KNIGHT:
            for to in KNIGHT_ATTACKS[frm]:
                if board[to] * side <= 0:
                    moves.append(Move(frm, to))
        elif kind == KING:
            for to in KING_ATTACKS[frm]:
                if board[to] * side <= 0:
                    moves.append(Move(frm, to))
        else:
            rays = ()
            if kind in (ROOK, QUEEN):
                rays += ROOK_RAYS[frm]
            if kind in (BISHOP, QUEEN):
                rays += BISHOP_RAYS[frm]
            for ray in rays:
                for to in ray:
                    occupant = board[to]
                    if occupant * side > 0:
                        break
                    moves.append(Move(frm, to))
                    if occupant:
                        break
    moves.extend(_castle_moves(p))
    return moves


def _castle_moves(p: Position) -> list[Move]:
    """Castling encoded as king-origin -> king-destination."""
    moves = []
    side = p.side
    if side == WHITE:
        ksq, opts = 4, ((CASTLE_WK, (5, 6), 6), (CASTLE_WQ, (1, 2, 3), 2))
    else:
        ksq, opts = 60, ((CASTLE_BK, (61, 62), 62), (CASTLE_BQ, (57, 58, 59), 58))
    if p.board[ksq] != KING * side:
        return moves
    if is_attacked(p.board, ksq, -side):
        return moves
    for flag, empties, dest in opts:
        if not p.castling & flag:
            continue
        if any(p.board[s] for s in empties):
            continue
        # King may not pass through or land on an attacked square.
        path = (ksq + (1 if dest > ksq else -1), dest)
        if any(is_attacked(p.board, s, -side) for s in path):
            continue
        moves.append(Move(ksq, dest))
    return moves


def _apply_to_board(p: Position, m: Move) -> list[int]:
    board = list(p.board)
    piece = board[m.from_sq]
    side = p.side
    board[m.from_sq] = 0
    if abs(piece) == PAWN and p.ep is not None and m.to_sq == p.ep and p.board[m.to_sq] == 0:
        board[m.to_sq - 8 * side] = 0  # en passant victim
    if abs(piece) == KING and abs(m.to_sq - m.from_sq) == 2 and (m.from_sq & 7) == 4:
        # Castle: move the rook too.
        rank_base = m.from_sq - 4
        if m.to_sq > m.from_sq:
            board[rank_base + 5] = board[rank_base + 7]
            board[rank_base + 7] = 0
        else:
            board[rank_base + 3] = board[rank_base + 0]
            board[rank_base + 0] = 0
    board[m.to_sq] = (m.promotion * side) if m.promotion else piece
    return board


def legal_moves(p: Position) -> list[Move]:
    """All legal moves, deterministically ordered by (from, to, promotion)."""
    out = []
    side = p.side
    for m in _pseudo_moves(p):
        board = _apply_to_board(p, m)
        ks = None
        target = KING * side
        for sq in range(64):
            if board[sq] == target:
                ks = sq
                break
        if ks is not None and not is_attacked(tuple(board), ks, -side):
            out.append(m)
    out.sort(key=Move._sort_key)
    return out


def is_legal(p: Position, m: Move) -> bool:
    return m in legal_moves(p)


def apply_move(p: Position, m: Move, check_legal: bool = True) -> Position:
    """Apply a legal move, returning the successor position."""
    if check_legal and not is_legal(p, m):
        raise IllegalMove(f"{m.uci()} is not legal in {p.fen()}")
    piece = p.board[m.from_sq]
    kind = abs(piece)
    side = p.side
    captured = p.board[m.to_sq] != 0 or (
        kind == PAWN and p.ep is not None and m.to_sq == p.ep
    )
    board = _apply_to_board(p, m)

    castling = p.castling
    if kind == KING:
        castling &= ~(CASTLE_WK | CASTLE_WQ) if side == WHITE else ~(CASTLE_BK | CASTLE_BQ)
    for sq, flag in ((0, CASTLE_WQ), (7, CASTLE_WK), (56, CASTLE_BQ), (63, CASTLE_BK)):
        if m.from_sq == sq or m.to_sq == sq:
            castling &= ~flag

    ep = None
    if kind == PAWN and abs(m.to_sq - m.from_sq) == 16:
        ep = (m.from_sq + m.to_sq) // 2

    halfmove = 0 if (kind == PAWN or captured) else p.halfmove + 1
    fullmove = p.fullmove + (1 if side == BLACK else 0)
    return Position(tuple(board), -side, castling, ep, halfmove, fullmove)


GAME_ONGOING = "ongoing"
GAME_CHECKMATE = "checkmate"
GAME_STALEMATE = "stalemate"
GAME_INSUFFICIENT = "insufficient-material"


def game_state(p: Position) -> str:
    if not legal_moves(p):
        return GAME_CHECKMATE if in_check(p) else GAME_STALEMATE
    if _insufficient_material(p):
        return GAME_INSUFFICIENT
    return GAME_ONGOING


def _insufficient_material(p: Position) -> bool:
    minors = []
    for sq in range(64):
        piece = p.board[sq]
        if piece == 0 or abs(piece) == KING:
            continue
        if abs(piece) in (PAWN, ROOK, QUEEN):
            return False
        minors.append((sq, piece))
    if len(minors) <= 1:
        return True
    # Bishops only, all on the same square color, cannot force mate.
    if all(abs(piece) == BISHOP for _, piece in minors):
        shades = {((sq & 7) + (sq >> 3)) & 1 for sq, _ in minors}
        return len(shades) == 1
    return False


def material_balance(p: Position) -> int:
    """Material sum in centipawns, positive when favoring the side to move."""
    total = 0
    for sq in range(64):
        piece = p.board[sq]
        if piece:
            total += PIECE_VALUES[abs(piece)] * (1 if piece * p.side > 0 else -1)
    return total


def perft(p: Position, depth: int) -> int:
    """Legal move tree node count; correctness oracle hook for tests."""
    if depth == 0:
        return 1
    if depth == 1:
        return len(legal_moves(p))
    total = 0
    for m in legal_moves(p):
        total += perft(apply_move(p, m, check_legal=False), depth - 1)
    return total
