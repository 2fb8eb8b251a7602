"""Corpus ingestion and synthesis.

Ingests the public puzzle-dump CSV schema (PuzzleId,FEN,Moves,Rating,...)
into validated records, skipping and counting rows whose FEN or move
list does not check out. Because this environment has no network access
to the real dump, a deterministic synthetic corpus with the same schema
can be generated from biased random self-play; it also yields the
forced-mate rows used as detector negatives.
"""

from __future__ import annotations

import csv
import json
import os
import random
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .board import (
    GAME_CHECKMATE,
    GAME_ONGOING,
    Move,
    Position,
    apply_move,
    game_state,
    in_check,
    legal_moves,
    parse_fen,
    parse_uci_move,
    serialize_fen,
    starting_position,
)

REQUIRED_COLUMNS = (
    "PuzzleId",
    "FEN",
    "Moves",
    "Rating",
    "RatingDeviation",
    "Popularity",
    "NbPlays",
    "Themes",
    "GameUrl",
)


class HeaderMismatch(ValueError):
    pass


@dataclass
class CorpusRecord:
    puzzle_id: str
    fen: str
    moves: list[str]
    rating: int
    themes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "puzzle_id": self.puzzle_id,
            "fen": self.fen,
            "moves": self.moves,
            "rating": self.rating,
            "themes": self.themes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusRecord":
        return cls(d["puzzle_id"], d["fen"], list(d["moves"]), d["rating"], list(d.get("themes", [])))

    def position(self) -> Position:
        return parse_fen(self.fen)


@dataclass
class IngestReport:
    accepted: int = 0
    skipped: dict[str, int] = field(default_factory=dict)

    def skip(self, reason: str) -> None:
        self.skipped[reason] = self.skipped.get(reason, 0) + 1

    @property
    def total(self) -> int:
        return self.accepted + sum(self.skipped.values())


def _validate_row(fen: str, moves_text: str) -> tuple[str, list[str]]:
    position = parse_fen(fen)
    moves = moves_text.split()
    if not moves:
        raise ValueError("empty move list")
    current = position
    legal_cache = legal_moves(current)
    for token in moves:
        mv = parse_uci_move(token)
        if mv not in legal_cache:
            raise ValueError(f"illegal move {token}")
        current = apply_move(current, mv, check_legal=False)
        legal_cache = legal_moves(current)
    return serialize_fen(position), moves


def ingest_lichess_csv(path: str) -> tuple[list[CorpusRecord], IngestReport]:
    """Parse and validate a puzzle-dump CSV; bad rows are counted, not fatal."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    report = IngestReport()
    records: list[CorpusRecord] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise HeaderMismatch(f"missing columns: {', '.join(missing)}")
        for row in reader:
            try:
                canonical, moves = _validate_row(row["FEN"], row["Moves"])
            except ValueError as exc:
                report.skip(_classify_skip(str(exc)))
                continue
            try:
                rating = int(row["Rating"])
            except ValueError:
                report.skip("bad-rating")
                continue
            records.append(
                CorpusRecord(
                    puzzle_id=row["PuzzleId"],
                    fen=canonical,
                    moves=moves,
                    rating=rating,
                    themes=row.get("Themes", "").split(),
                )
            )
            report.accepted += 1
    return records, report


def _classify_skip(message: str) -> str:
    if "illegal move" in message:
        return "illegal-move"
    if "empty move" in message:
        return "empty-moves"
    return "bad-fen"


def save_corpus(records: list[CorpusRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec.as_dict(), sort_keys=True) + "\n")


def load_corpus(path: str) -> list[CorpusRecord]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(CorpusRecord.from_dict(json.loads(line)))
    return out


# -- synthetic corpus ---------------------------------------------------------

def playout_positions(
    rng: random.Random, max_plies: int = 70, min_ply: int = 16, capture_bias: float = 0.45
) -> Iterator[Position]:
    """Biased random self-play from the initial position."""
    p = starting_position()
    for ply in range(max_plies):
        if game_state(p) != GAME_ONGOING:
            return
        moves = legal_moves(p)
        captures = [m for m in moves if p.board[m.to_sq] != 0]
        pool = captures if captures and rng.random() < capture_bias else moves
        p = apply_move(p, pool[rng.randrange(len(pool))], check_legal=False)
        if ply >= min_ply:
            yield p


def _plain_moves_first(moves: list[Move]) -> list[Move]:
    # Prefer quiet/queen promotions so witness lines read like typical play.
    return sorted(moves, key=lambda m: (m.promotion is not None and m.promotion != 5,))


def find_mate_in_two(p: Position) -> Optional[list[Move]]:
    """A forcing witness line (check, any defense, mate) when one exists."""
    for m1 in _plain_moves_first(legal_moves(p)):
        q = apply_move(p, m1, check_legal=False)
        if not in_check(q):
            continue
        replies = legal_moves(q)
        if not replies:
            continue
        witness = None
        forced = True
        for r in replies:
            q2 = apply_move(q, r, check_legal=False)
            mating = None
            for m2 in _plain_moves_first(legal_moves(q2)):
                q3 = apply_move(q2, m2, check_legal=False)
                if not legal_moves(q3) and in_check(q3):
                    mating = m2
                    break
            if mating is None:
                forced = False
                break
            if witness is None:
                witness = [m1, r, mating]
        if forced and witness:
            return witness
    return None


def _short_line(p: Position, rng: random.Random) -> list[str]:
    out = []
    current = p
    for _ in range(2):
        moves = legal_moves(current)
        if not moves:
            break
        captures = [m for m in moves if current.board[m.to_sq] != 0]
        pool = captures or moves
        mv = pool[rng.randrange(len(pool))]
        out.append(mv.uci())
        current = apply_move(current, mv, check_legal=False)
    return out


def _piece_count(p: Position) -> int:
    return sum(1 for sq in range(64) if p.board[sq])


_ID_ALPHABET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"


def _row_id(index: int) -> str:
    n = index + 14_776_336  # five base-62 digits
    out = ""
    for _ in range(5):
        n, r = divmod(n, 62)
        out = _ID_ALPHABET[r] + out
    return out


def make_synthetic_rows(
    count: int, seed: int = 0, mate_rows: int = 0, max_mate_scans: int = 20_000
) -> list[dict]:
    """Deterministic corpus rows in the public dump's CSV schema."""
    rng = random.Random(seed)
    rows: list[dict] = []
    mates_found = 0
    scans = 0
    while len(rows) < count:
        for p in playout_positions(rng):
            if len(rows) >= count:
                break
            themes = ["middlegame" if _piece_count(p) > 14 else "endgame"]
            moves = None
            if mates_found < mate_rows and scans < max_mate_scans:
                scans += 1
                witness = find_mate_in_two(p)
                if witness and len(witness) == 3:
                    moves = [m.uci() for m in witness]
                    themes = ["mate", "mateIn2", "short"]
                    mates_found += 1
            if moves is None:
                moves = _short_line(p, rng)
                if not moves:
                    continue
            rows.append(
                {
                    "PuzzleId": _row_id(len(rows)),
                    "FEN": serialize_fen(p),
                    "Moves": " ".join(moves),
                    "Rating": 600 + rng.randrange(2300),
                    "RatingDeviation": 50 + rng.randrange(150),
                    "Popularity": rng.randrange(-20, 101),
                    "NbPlays": rng.randrange(10_000),
                    "Themes": " ".join(themes),
                    "GameUrl": f"https://lichess.org/training/{_row_id(len(rows))}",
                    "OpeningTags": "",
                }
            )
    return rows


def collect_mate_in_two(
    count: int, seed: int = 0, max_positions: int = 50_000
) -> list[tuple[Position, list[Move]]]:
    """Scan self-play positions until `count` forced mates are found."""
    rng = random.Random(seed)
    found: list[tuple[Position, list[Move]]] = []
    scanned = 0
    while len(found) < count and scanned < max_positions:
        for p in playout_positions(rng):
            scanned += 1
            witness = find_mate_in_two(p)
            # Rows only mateable through an underpromotion belong to that
            # theme and would poison a negative corpus; skip them.
            if (
                witness
                and len(witness) == 3
                and all(m.promotion in (None, 5) for m in witness)
            ):
                found.append((p, witness))
                if len(found) >= count:
                    break
            if scanned >= max_positions:
                break
    if len(found) < count:
        raise RuntimeError(f"only {len(found)} forced mates in {scanned} positions")
    return found


def write_lichess_csv(rows: list[dict], path: str) -> None:
    columns = list(REQUIRED_COLUMNS) + ["OpeningTags"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
