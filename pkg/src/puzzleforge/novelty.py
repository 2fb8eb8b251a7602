"""Nearest-neighbor search over piece-placement sketches.

A position's sketch is its set of (square, color, kind) tokens; the
similarity of two positions is the Jaccard overlap of their sketches,
side to move ignored. An inverted index from token to holders makes
k-NN queries cheap and exactly equivalent to brute force.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

from .board import Position

Token = tuple[int, int, int]  # square, color, piece kind


class EmptyCorpus(ValueError):
    pass


def position_tokens(p: Position) -> frozenset[Token]:
    return frozenset(
        (sq, 1 if piece > 0 else -1, abs(piece)) for sq, piece in p.pieces()
    )


def similarity(a: Position, b: Position) -> float:
    ta, tb = position_tokens(a), position_tokens(b)
    if not ta and not tb:
        return 1.0
    inter = len(ta & tb)
    union = len(ta) + len(tb) - inter
    return inter / union


@dataclass
class NoveltyIndex:
    postings: dict[Token, list[Hashable]] = field(default_factory=dict)
    sizes: dict[Hashable, int] = field(default_factory=dict)

    def add(self, source_id: Hashable, p: Position) -> None:
        tokens = position_tokens(p)
        self.sizes[source_id] = len(tokens)
        for token in tokens:
            self.postings.setdefault(token, []).append(source_id)

    def nearest(self, p: Position, k: int) -> list[tuple[Hashable, float]]:
        """Top-k by similarity; ties broken by ascending source id."""
        tokens = position_tokens(p)
        overlap: dict[Hashable, int] = {}
        for token in tokens:
            for source_id in self.postings.get(token, ()):
                overlap[source_id] = overlap.get(source_id, 0) + 1
        scored = []
        for source_id, inter in overlap.items():
            union = len(tokens) + self.sizes[source_id] - inter
            scored.append((source_id, inter / union))
        # Zero-overlap corpus entries still rank (all at similarity 0)
        # when k exceeds the number of overlapping entries.
        if len(scored) < k:
            seen = set(overlap)
            zeros = [
                (source_id, 0.0) for source_id in self.sizes if source_id not in seen
            ]
            scored.extend(zeros)
        scored.sort(key=lambda item: (-item[1], str(item[0])))
        return scored[:k]

    def max_similarity(self, p: Position) -> float:
        top = self.nearest(p, 1)
        return top[0][1] if top else 0.0


def build_index(corpus: Sequence[tuple[Hashable, Position]]) -> NoveltyIndex:
    if not corpus:
        raise EmptyCorpus("cannot index an empty corpus")
    index = NoveltyIndex()
    for source_id, position in corpus:
        index.add(source_id, position)
    return index


def brute_force_nearest(
    corpus: Sequence[tuple[Hashable, Position]], p: Position, k: int
) -> list[tuple[Hashable, float]]:
    """Quadratic oracle for the index; results must match exactly."""
    scored = [(source_id, similarity(p, q)) for source_id, q in corpus]
    scored.sort(key=lambda item: (-item[1], str(item[0])))
    return scored[:k]
