"""Append-only candidate store.

Every fact about a candidate is an event in a JSONL log; replaying the
log reconstructs the exact in-memory state, so the log file is the
database, the checkpoint, and the audit trail at once. Event times are
logical sequence numbers, which keeps two runs of the same seeded
pipeline byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .board import Position, parse_fen, serialize_fen
from .rewards import RewardReport
from .themes import ThemeLabel

VERDICT_ACCEPTED = "accepted"
VERDICT_REJECTED = "rejected"


def candidate_id(fen: str) -> str:
    canonical = serialize_fen(parse_fen(fen))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass
class Verdict:
    reviewer: str
    decision: str
    note: str = ""
    at: int = 0

    def as_dict(self) -> dict:
        return {
            "reviewer": self.reviewer,
            "decision": self.decision,
            "note": self.note,
            "at": self.at,
        }


@dataclass
class PuzzleCandidate:
    id: str
    fen: str
    sources: list[str] = field(default_factory=list)
    reward_report: Optional[RewardReport] = None
    scored_depth: Optional[int] = None
    score_failed: bool = False
    themes: list[ThemeLabel] = field(default_factory=list)
    neighbors: list[tuple[str, float]] = field(default_factory=list)
    neighbor_fens: dict[str, str] = field(default_factory=dict)
    max_similarity: Optional[float] = None
    search_nodes: Optional[int] = None
    first_stable_depth: Optional[int] = None
    adversarial: bool = False
    verdicts: dict[str, Verdict] = field(default_factory=dict)
    created_at: int = 0

    def position(self) -> Position:
        return parse_fen(self.fen)

    @property
    def reward(self) -> float:
        return self.reward_report.reward if self.reward_report else 0.0

    @property
    def ci_score(self) -> float:
        return self.reward_report.ci_score if self.reward_report else 0.0

    def theme_names(self) -> list[str]:
        return [label.theme for label in self.themes]

    def decision(self, policy: str = "any-accept") -> Optional[str]:
        """Effective verdict under the given multi-reviewer policy."""
        if not self.verdicts:
            return None
        decisions = [v.decision for v in self.verdicts.values()]
        if policy == "any-accept":
            if VERDICT_ACCEPTED in decisions:
                return VERDICT_ACCEPTED
            return VERDICT_REJECTED
        if policy == "unanimous":
            if all(d == VERDICT_ACCEPTED for d in decisions):
                return VERDICT_ACCEPTED
            return VERDICT_REJECTED
        raise ValueError(f"unknown verdict policy {policy!r}")


class Store:
    """Event-sourced candidate collection with a single append writer."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.candidates: dict[str, PuzzleCandidate] = {}
        self.generation_stats: list[dict] = []
        self.selections: dict[str, list[str]] = {}
        self.baseline_nodes: Optional[list[int]] = None
        self.seq = 0
        self._fh = None
        if path:
            if os.path.exists(path):
                with open(path, encoding="utf-8") as f:
                    for line in f:
                        line = line.strip()
                        if line:
                            self._apply(json.loads(line))
            self._fh = open(path, "a", encoding="utf-8")

    # -- event plumbing ------------------------------------------------------

    def append(self, event: dict) -> dict:
        event = dict(event)
        event["seq"] = self.seq
        self._apply(event)
        if self._fh:
            self._fh.write(json.dumps(event, sort_keys=True) + "\n")
            self._fh.flush()
        return event

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None

    def _apply(self, event: dict) -> None:
        self.seq = event["seq"] + 1
        kind = event["type"]
        if kind == "candidate-added":
            self._apply_added(event)
        elif kind == "scored":
            self._apply_scored(event)
        elif kind == "score-failed":
            cand = self.candidates[event["id"]]
            cand.score_failed = True
        elif kind == "labeled":
            cand = self.candidates[event["id"]]
            cand.themes = [ThemeLabel.from_dict(d) for d in event["themes"]]
        elif kind == "neighbors":
            cand = self.candidates[event["id"]]
            cand.neighbors = [(row[0], row[1]) for row in event["neighbors"]]
            cand.neighbor_fens = {row[0]: row[2] for row in event["neighbors"] if len(row) > 2}
            cand.max_similarity = event["max_similarity"]
        elif kind == "probed":
            cand = self.candidates[event["id"]]
            cand.search_nodes = event["nodes_total"]
            cand.first_stable_depth = event["first_stable_depth"]
            cand.adversarial = event["adversarial"]
        elif kind == "verdict":
            cand = self.candidates[event["id"]]
            cand.verdicts[event["reviewer"]] = Verdict(
                reviewer=event["reviewer"],
                decision=event["decision"],
                note=event.get("note", ""),
                at=event["seq"],
            )
        elif kind == "generation-stats":
            self.generation_stats.append(
                {"source": event["source"], "stats": event["stats"]}
            )
        elif kind == "selected":
            self.selections[event["theme"]] = list(event["ids"])
        elif kind == "baseline-nodes":
            self.baseline_nodes = list(event["nodes"])
        else:
            raise ValueError(f"unknown event type {kind!r}")

    def _apply_added(self, event: dict) -> None:
        cid = event["id"]
        cand = self.candidates.get(cid)
        if cand is None:
            self.candidates[cid] = PuzzleCandidate(
                id=cid,
                fen=event["fen"],
                sources=[event["source"]],
                created_at=event["seq"],
            )
        elif event["source"] not in cand.sources:
            cand.sources.append(event["source"])

    def _apply_scored(self, event: dict) -> None:
        cand = self.candidates[event["id"]]
        depth = event["depth"]
        # Duplicate scores: the deeper analysis wins.
        if cand.scored_depth is not None and cand.scored_depth >= depth:
            return
        cand.reward_report = RewardReport.from_dict(event["report"])
        cand.scored_depth = depth
        cand.score_failed = False

    # -- recording helpers ----------------------------------------------------

    def add_candidate(self, fen: str, source: str) -> PuzzleCandidate:
        canonical = serialize_fen(parse_fen(fen))
        cid = candidate_id(canonical)
        self.append(
            {"type": "candidate-added", "id": cid, "fen": canonical, "source": source}
        )
        return self.candidates[cid]

    def record_score(self, cid: str, report: RewardReport, depth: int) -> None:
        self.append(
            {"type": "scored", "id": cid, "report": report.as_dict(), "depth": depth}
        )

    def record_score_failure(self, cid: str) -> None:
        self.append({"type": "score-failed", "id": cid})

    def record_labels(self, cid: str, labels: list[ThemeLabel]) -> None:
        self.append(
            {"type": "labeled", "id": cid, "themes": [l.as_dict() for l in labels]}
        )

    def record_neighbors(
        self, cid: str, neighbors: list[tuple[str, float, str]], max_similarity: float
    ) -> None:
        self.append(
            {
                "type": "neighbors",
                "id": cid,
                "neighbors": [list(row) for row in neighbors],
                "max_similarity": max_similarity,
            }
        )

    def record_probe(
        self, cid: str, nodes_total: int, first_stable_depth: Optional[int], adversarial: bool
    ) -> None:
        self.append(
            {
                "type": "probed",
                "id": cid,
                "nodes_total": nodes_total,
                "first_stable_depth": first_stable_depth,
                "adversarial": adversarial,
            }
        )

    def record_verdict(self, cid: str, reviewer: str, decision: str, note: str = "") -> dict:
        if decision not in (VERDICT_ACCEPTED, VERDICT_REJECTED):
            raise ValueError(f"bad decision {decision!r}")
        if cid not in self.candidates:
            raise KeyError(cid)
        current = self.candidates[cid].verdicts.get(reviewer)
        if current and current.decision == decision and current.note == note:
            return {"idempotent": True}  # identical repost: no new event
        return self.append(
            {
                "type": "verdict",
                "id": cid,
                "reviewer": reviewer,
                "decision": decision,
                "note": note,
            }
        )

    def record_generation_stats(self, source: str, stats: list[dict]) -> None:
        self.append({"type": "generation-stats", "source": source, "stats": stats})

    def record_selection(self, theme: str, ids: list[str]) -> None:
        self.append({"type": "selected", "theme": theme, "ids": ids})

    def record_baseline(self, nodes: list[int]) -> None:
        self.append({"type": "baseline-nodes", "nodes": nodes})

    # -- queries ---------------------------------------------------------------

    def all_candidates(self) -> Iterator[PuzzleCandidate]:
        return iter(self.candidates.values())

    def get(self, cid: str) -> Optional[PuzzleCandidate]:
        return self.candidates.get(cid)

    def accepted(self, policy: str = "any-accept") -> list[PuzzleCandidate]:
        return [
            c for c in self.candidates.values() if c.decision(policy) == VERDICT_ACCEPTED
        ]
