import json
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from puzzleforge.uci import (  # noqa: E402
    EngineHandle,
    EnginePair,
    EngineProfile,
    default_engine_command,
)

FAKE_ENGINE = os.path.join(os.path.dirname(__file__), "fake_engine.py")

# Determinism-mode settings shared by every real-engine test.
STRONG_DEPTH = 18
BULK_STRONG_DEPTH = 12
WEAK_DEPTH = 4
HASH_MB = 128


def engine_available() -> bool:
    return default_engine_command() is not None and not os.environ.get(
        "PUZZLEFORGE_SKIP_ENGINE"
    )


requires_engine = pytest.mark.skipif(
    not engine_available(), reason="pinned UCI engine not installed (see README)"
)

slow_acceptance = pytest.mark.skipif(
    bool(os.environ.get("PUZZLEFORGE_FAST")),
    reason="long acceptance run skipped in fast mode",
)


def strong_profile(depth: int = STRONG_DEPTH) -> EngineProfile:
    from puzzleforge.uci import resolve_profile

    return resolve_profile("strong", depth=depth, multipv=2, hash_mb=HASH_MB)


def weak_profile(depth: int = WEAK_DEPTH) -> EngineProfile:
    from puzzleforge.uci import resolve_profile

    return resolve_profile("weak", depth=depth, hash_mb=HASH_MB)


@pytest.fixture(scope="session")
def engine_pair():
    if not engine_available():
        pytest.skip("pinned UCI engine not installed")
    pair = EnginePair(strong_profile(), weak_profile())
    yield pair
    pair.close()


@pytest.fixture(scope="session")
def bulk_engine_pair():
    if not engine_available():
        pytest.skip("pinned UCI engine not installed")
    pair = EnginePair(strong_profile(BULK_STRONG_DEPTH), weak_profile())
    yield pair
    pair.close()


@pytest.fixture(scope="session")
def engine_pool4():
    """Four engine pairs, the acceptance suite's worker pool."""
    from puzzleforge.uci import EnginePool

    if not engine_available():
        pytest.skip("pinned UCI engine not installed")
    pool = EnginePool(strong_profile(BULK_STRONG_DEPTH), weak_profile(), size=4)
    yield pool
    pool.close()


BIG_CORPUS_SEED = 21
BIG_CORPUS_ROWS = 10_000


@pytest.fixture(scope="session")
def big_corpus_csv_path():
    from puzzleforge.corpus import make_synthetic_rows, write_lichess_csv

    os.makedirs(DATA_DIR, exist_ok=True)
    path = os.path.join(DATA_DIR, f"synth_corpus_{BIG_CORPUS_SEED}_{BIG_CORPUS_ROWS}.csv")
    if not os.path.exists(path):
        rows = make_synthetic_rows(BIG_CORPUS_ROWS, seed=BIG_CORPUS_SEED)
        write_lichess_csv(rows, path)
    return path


DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

CORPUS_SEED = 7
CORPUS_ROWS = 1200
NEGATIVES_SEED = 11
NEGATIVES_COUNT = 50


@pytest.fixture(scope="session")
def corpus_csv_path():
    """Deterministic synthetic corpus in the public dump schema (cached)."""
    from puzzleforge.corpus import make_synthetic_rows, write_lichess_csv

    os.makedirs(DATA_DIR, exist_ok=True)
    path = os.path.join(DATA_DIR, f"synth_corpus_{CORPUS_SEED}_{CORPUS_ROWS}.csv")
    if not os.path.exists(path):
        rows = make_synthetic_rows(CORPUS_ROWS, seed=CORPUS_SEED)
        write_lichess_csv(rows, path)
    return path


@pytest.fixture(scope="session")
def corpus_records(corpus_csv_path):
    from puzzleforge.corpus import ingest_lichess_csv

    records, report = ingest_lichess_csv(corpus_csv_path)
    assert report.accepted == len(records)
    return records


@pytest.fixture(scope="session")
def corpus_fens(corpus_records):
    """Canonical board+side strings for model fitting."""
    return [" ".join(rec.fen.split()[:2]) for rec in corpus_records]


@pytest.fixture(scope="session")
def mate_negatives():
    """Fifty forced mate-in-two positions with witness lines (cached)."""
    from puzzleforge.board import parse_fen, parse_uci_move
    from puzzleforge.corpus import collect_mate_in_two

    os.makedirs(DATA_DIR, exist_ok=True)
    path = os.path.join(DATA_DIR, f"mate_negatives_{NEGATIVES_SEED}_{NEGATIVES_COUNT}.json")
    if not os.path.exists(path):
        found = collect_mate_in_two(NEGATIVES_COUNT, seed=NEGATIVES_SEED)
        payload = [
            {"fen": p.fen(), "moves": [m.uci() for m in line]} for p, line in found
        ]
        with open(path, "w") as f:
            json.dump(payload, f, indent=1)
    with open(path) as f:
        payload = json.load(f)
    return [
        (parse_fen(entry["fen"]), [parse_uci_move(u) for u in entry["moves"]])
        for entry in payload
    ]


@pytest.fixture
def fake_pair(tmp_path):
    """EnginePair backed by scripted engines; configure via .program()."""

    class Factory:
        def __init__(self):
            self._pairs = []

        def program(self, strong_scenario, weak_scenario=None):
            spath = tmp_path / "strong.json"
            spath.write_text(json.dumps(strong_scenario))
            wpath = tmp_path / "weak.json"
            wpath.write_text(json.dumps(weak_scenario or strong_scenario))
            pair = EnginePair(
                EngineProfile(command=(sys.executable, FAKE_ENGINE, str(spath)), role="strong"),
                EngineProfile(command=(sys.executable, FAKE_ENGINE, str(wpath)), role="weak"),
            )
            self._pairs.append(pair)
            return pair

        def close(self):
            for pair in self._pairs:
                pair.close()

    factory = Factory()
    yield factory
    factory.close()
