"""Character-level position model: fit on FEN strings, sample new ones.

Counts are kept for every context length up to `order` and combined by
backoff interpolation, with additive smoothing over a fixed alphabet at
the base. Unseen long contexts therefore defer to shorter ones instead
of dissolving into uniform noise, which keeps sampled strings on the
FEN manifold, while the additive base keeps every character (including
the stop symbol) reachable so sampling always terminates.
"""

from __future__ import annotations

import gzip
import json
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .board import Position, parse_fen, serialize_fen, validate_realism

BOS = "\x02"
EOS = "\x03"

# Board field, side field, separators: everything a board+side FEN can hold.
ALPHABET = tuple(sorted(set("pnbrqkPNBRQK12345678/ wb") | {EOS}))
_ALPHA_INDEX = {ch: i for i, ch in enumerate(ALPHABET)}

MAX_SAMPLE_CHARS = 120


class EmptyCorpus(ValueError):
    pass


class RejectionBudgetExhausted(RuntimeError):
    def __init__(self, attempts: int):
        super().__init__(f"no valid position after {attempts} sampled strings")
        self.attempts = attempts


def canonical_board_side(fen: str) -> str:
    """Reduce any accepted FEN record to its canonical board+side form."""
    return " ".join(serialize_fen(parse_fen(fen)).split()[:2])


@dataclass
class NgramModel:
    order: int
    smoothing: float = 0.1
    # counts[n] maps an n-character context to next-character counts.
    counts: dict[int, dict[str, dict[str, int]]] = field(default_factory=dict)
    total_pairs: int = 0

    def __post_init__(self):
        for n in range(self.order + 1):
            self.counts.setdefault(n, {})

    def fit_string(self, text: str) -> None:
        seq = BOS * self.order + text + EOS
        for i in range(self.order, len(seq)):
            nxt = seq[i]
            for n in range(self.order + 1):
                ctx = seq[i - n : i]
                bucket = self.counts[n].setdefault(ctx, {})
                bucket[nxt] = bucket.get(nxt, 0) + 1
            self.total_pairs += 1

    def _base_prob(self, nxt: str) -> float:
        bucket = self.counts[0].get("", {})
        total = sum(bucket.values())
        return (bucket.get(nxt, 0) + self.smoothing) / (
            total + self.smoothing * len(ALPHABET)
        )

    def prob(self, context: str, nxt: str) -> float:
        """Interpolated probability of `nxt` after up to `order` chars.

        Each matched context level mixes its counts with the shorter
        level's estimate, weighted by the number of distinct successors
        seen there (Witten-Bell style), so noisy singleton contexts
        barely move the estimate.
        """
        context = context[-self.order :] if self.order else ""
        p = self._base_prob(nxt)
        for n in range(1, len(context) + 1):
            ctx = context[len(context) - n :]
            bucket = self.counts[n].get(ctx)
            if bucket is None:
                continue
            total = sum(bucket.values())
            uniq = len(bucket)
            p = (bucket.get(nxt, 0) + uniq * p) / (total + uniq)
        return p

    def distribution(self, context: str) -> list[float]:
        """Probabilities aligned with ALPHABET; sums to 1."""
        context = context[-self.order :] if self.order else ""
        base_bucket = self.counts[0].get("", {})
        base_total = sum(base_bucket.values())
        denom = base_total + self.smoothing * len(ALPHABET)
        probs = [
            (base_bucket.get(ch, 0) + self.smoothing) / denom for ch in ALPHABET
        ]
        for n in range(1, len(context) + 1):
            ctx = context[len(context) - n :]
            bucket = self.counts[n].get(ctx)
            if bucket is None:
                continue
            uniq = len(bucket)
            total = sum(bucket.values()) + uniq
            probs = [
                (bucket.get(ch, 0) + uniq * p) / total
                for ch, p in zip(ALPHABET, probs)
            ]
        return probs

    def logprob(self, text: str) -> float:
        seq = BOS * self.order + text + EOS
        lp = 0.0
        for i in range(self.order, len(seq)):
            lp += math.log(self.prob(seq[i - self.order : i], seq[i]))
        return lp

    def perplexity(self, corpus: Iterable[str]) -> float:
        lp = 0.0
        chars = 0
        for text in corpus:
            lp += self.logprob(text)
            chars += len(text) + 1  # count the stop symbol
        return math.exp(-lp / max(1, chars))

    def sample_string(self, rng: random.Random) -> Optional[str]:
        out: list[str] = []
        context = BOS * self.order
        eos_index = _ALPHA_INDEX[EOS]
        while len(out) < MAX_SAMPLE_CHARS:
            probs = self.distribution(context)
            roll = rng.random()
            acc = 0.0
            pick = len(ALPHABET) - 1
            for i, p in enumerate(probs):
                acc += p
                if roll < acc:
                    pick = i
                    break
            if pick == eos_index:
                return "".join(out)
            ch = ALPHABET[pick]
            out.append(ch)
            context = (context + ch)[-self.order :] if self.order else ""
        return None  # hit the length cap; caller rejects

    # -- persistence ---------------------------------------------------------

    def to_payload(self) -> dict:
        return {
            "format": "ngram-backoff-counts",
            "version": 2,
            "order": self.order,
            "smoothing": self.smoothing,
            "counts": {str(n): table for n, table in self.counts.items()},
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "NgramModel":
        if payload.get("format") != "ngram-backoff-counts" or payload.get("version") != 2:
            raise ValueError("unrecognized model payload")
        counts = {
            int(n): {ctx: dict(bucket) for ctx, bucket in table.items()}
            for n, table in payload["counts"].items()
        }
        model = cls(order=payload["order"], smoothing=payload["smoothing"], counts=counts)
        top = counts.get(model.order, {})
        model.total_pairs = sum(sum(b.values()) for b in top.values())
        return model

    def save(self, path: str) -> None:
        opener = gzip.open if path.endswith(".gz") else open
        with opener(path, "wt", encoding="utf-8") as f:
            json.dump(self.to_payload(), f)

    @classmethod
    def load(cls, path: str) -> "NgramModel":
        opener = gzip.open if path.endswith(".gz") else open
        with opener(path, "rt", encoding="utf-8") as f:
            return cls.from_payload(json.load(f))


def fit_ngram(corpus: list[str], order: int, smoothing: float = 0.1) -> NgramModel:
    """Fit next-character counts on canonical board+side FEN strings."""
    if not corpus:
        raise EmptyCorpus("cannot fit a model on an empty corpus")
    model = NgramModel(order=order, smoothing=smoothing)
    for text in corpus:
        model.fit_string(text)
    return model


@dataclass
class SampleOutcome:
    position: Position
    attempts: int


def sample_fen(
    model: NgramModel,
    rng: random.Random,
    max_attempts: int = 100,
    require_realism: bool = True,
) -> SampleOutcome:
    """Draw strings until one decodes into an acceptable position."""
    for attempt in range(1, max_attempts + 1):
        text = model.sample_string(rng)
        if text is None:
            continue
        try:
            position = parse_fen(text, strict=True)
        except ValueError:
            continue
        if require_realism and validate_realism(position):
            continue
        return SampleOutcome(position, attempt)
    raise RejectionBudgetExhausted(max_attempts)
