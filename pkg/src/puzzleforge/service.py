"""Local curation service over the candidate store.

A thin JSON view plus a verdict appender: reads never mutate, verdict
posts append events through the store's single writer, and a restart
rebuilds identical state from the log. Meant for a localhost curation
session, so there is no auth.
"""

from __future__ import annotations

from typing import Literal, Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from .board import apply_move, parse_fen, serialize_fen
from .notation import line_san
from .pipeline import NothingAccepted, export_booklet, lichess_analysis_url
from .store import Store, PuzzleCandidate
from .themes import THEMES

SORT_KEYS = ("reward", "ci", "novelty", "id")
STATUSES = ("pending", "accepted", "rejected", "all")


class CandidateSummary(BaseModel):
    id: str
    fen: str
    reward: float
    ci_score: float
    themes: list[str]
    verdict: Optional[str] = None
    max_similarity: Optional[float] = None


class Page(BaseModel):
    total: int
    limit: int
    offset: int
    items: list[CandidateSummary]


class NeighborOut(BaseModel):
    id: str
    similarity: float
    fen: str = ""
    analysis_url: str = ""


class VerdictOut(BaseModel):
    reviewer: str
    decision: str
    note: str = ""
    at: int


class CandidateDetail(BaseModel):
    id: str
    fen: str
    side_to_move: str
    analysis_url: str
    reward: float
    ci_score: float
    unique: bool
    best_eval: Optional[int] = None
    second_eval: Optional[int] = None
    solution_uci: list[str]
    solution_san: list[str]
    fens_by_ply: list[str] = Field(
        description="Position after each solution ply; index 0 is the diagram"
    )
    themes: list[str]
    evidence: dict[str, list[list[object]]]
    neighbors: list[NeighborOut]
    verdicts: list[VerdictOut]
    verdict: Optional[str] = None
    sources: list[str]
    search_nodes: Optional[int] = None
    adversarial: bool = False


class VerdictIn(BaseModel):
    decision: Literal["accepted", "rejected"]
    reviewer: str = Field(min_length=1)
    note: str = ""


class VerdictAck(BaseModel):
    id: str
    verdict: Optional[str]
    verdicts: list[VerdictOut]


def _summary(cand: PuzzleCandidate, policy: str) -> CandidateSummary:
    return CandidateSummary(
        id=cand.id,
        fen=cand.fen,
        reward=cand.reward,
        ci_score=cand.ci_score,
        themes=cand.theme_names(),
        verdict=cand.decision(policy),
        max_similarity=cand.max_similarity,
    )


def _detail(cand: PuzzleCandidate, policy: str) -> CandidateDetail:
    position = cand.position()
    line = list(cand.reward_report.solution_line) if cand.reward_report else []
    fens = [cand.fen]
    cur = position
    for move in line:
        cur = apply_move(cur, move, check_legal=False)
        fens.append(serialize_fen(cur))
    uniq = cand.reward_report.uniqueness if cand.reward_report else None
    return CandidateDetail(
        id=cand.id,
        fen=cand.fen,
        side_to_move="w" if position.side > 0 else "b",
        analysis_url=lichess_analysis_url(cand.fen),
        reward=cand.reward,
        ci_score=cand.ci_score,
        unique=bool(uniq and uniq.unique),
        best_eval=uniq.best_eval if uniq else None,
        second_eval=uniq.second_eval if uniq else None,
        solution_uci=[m.uci() for m in line],
        solution_san=line_san(position, line) if line else [],
        fens_by_ply=fens,
        themes=cand.theme_names(),
        evidence={
            label.theme: [list(e) for e in label.evidence] for label in cand.themes
        },
        neighbors=[
            NeighborOut(
                id=nid,
                similarity=sim,
                fen=cand.neighbor_fens.get(nid, ""),
                analysis_url=(
                    lichess_analysis_url(cand.neighbor_fens[nid])
                    if cand.neighbor_fens.get(nid)
                    else ""
                ),
            )
            for nid, sim in cand.neighbors
        ],
        verdicts=[
            VerdictOut(**v.as_dict()) for v in sorted(cand.verdicts.values(), key=lambda v: v.at)
        ],
        verdict=cand.decision(policy),
        sources=cand.sources,
        search_nodes=cand.search_nodes,
        adversarial=cand.adversarial,
    )


def create_app(store: Store, verdict_policy: str = "any-accept") -> FastAPI:
    app = FastAPI(title="puzzleforge review service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],  # localhost curation tool
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store
    app.state.policy = verdict_policy

    @app.get("/candidates", response_model=Page)
    def list_candidates(
        theme: Optional[str] = None,
        status: str = "all",
        sort: str = "reward",
        limit: int = Query(default=50, ge=1, le=500),
        offset: int = Query(default=0, ge=0),
    ) -> Page:
        if theme is not None and theme not in THEMES:
            raise HTTPException(status_code=400, detail=f"unknown theme {theme!r}")
        if sort not in SORT_KEYS:
            raise HTTPException(status_code=400, detail=f"unknown sort {sort!r}")
        if status not in STATUSES:
            raise HTTPException(status_code=400, detail=f"unknown status {status!r}")
        policy = app.state.policy
        items = [c for c in store.all_candidates() if not c.score_failed]
        if theme:
            items = [c for c in items if theme in c.theme_names()]
        if status != "all":
            wanted = None if status == "pending" else status
            items = [c for c in items if c.decision(policy) == wanted]
        keys = {
            "reward": lambda c: (-c.reward, -c.ci_score, c.max_similarity or 0.0, c.id),
            "ci": lambda c: (-c.ci_score, -c.reward, c.id),
            "novelty": lambda c: (c.max_similarity or 0.0, -c.reward, c.id),
            "id": lambda c: c.id,
        }
        items.sort(key=keys[sort])
        page = items[offset : offset + limit]
        return Page(
            total=len(items),
            limit=limit,
            offset=offset,
            items=[_summary(c, policy) for c in page],
        )

    @app.get("/candidates/{cid}", response_model=CandidateDetail)
    def get_candidate(cid: str) -> CandidateDetail:
        cand = store.get(cid)
        if cand is None:
            raise HTTPException(status_code=404, detail="no such candidate")
        return _detail(cand, app.state.policy)

    @app.post("/candidates/{cid}/verdict", response_model=VerdictAck)
    def post_verdict(cid: str, body: VerdictIn) -> VerdictAck:
        cand = store.get(cid)
        if cand is None:
            raise HTTPException(status_code=404, detail="no such candidate")
        store.record_verdict(cid, body.reviewer, body.decision, body.note)
        cand = store.get(cid)
        return VerdictAck(
            id=cid,
            verdict=cand.decision(app.state.policy),
            verdicts=[
                VerdictOut(**v.as_dict())
                for v in sorted(cand.verdicts.values(), key=lambda v: v.at)
            ],
        )

    @app.get("/export/booklet.md", response_class=PlainTextResponse)
    def export_markdown() -> str:
        try:
            return export_booklet(store, "markdown", app.state.policy)
        except NothingAccepted as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.get("/export/booklet.json")
    def export_json():
        try:
            text = export_booklet(store, "json", app.state.policy)
        except NothingAccepted as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        import json as _json

        return _json.loads(text)

    @app.get("/themes")
    def list_themes():
        return {"themes": list(THEMES), "selections": store.selections}

    return app
