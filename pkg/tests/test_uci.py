import json
import os
import sys

import pytest

from puzzleforge.board import parse_fen, parse_uci_move
from puzzleforge.uci import (
    EngineCrashed,
    EngineHandle,
    EngineNotFound,
    EngineProfile,
    HandshakeTimeout,
    OptionRejected,
    ProtocolError,
    mate_to_cp,
    _parse_info,
)

FAKE = os.path.join(os.path.dirname(__file__), "fake_engine.py")
START = parse_fen("rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1")


def fake_profile(tmp_path, scenario, **kwargs):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario))
    kwargs.setdefault("role", "strong")
    return EngineProfile(command=(sys.executable, FAKE, str(path)), **kwargs)


class TestSpawn:
    def test_handshake_ok(self, tmp_path):
        with EngineHandle(fake_profile(tmp_path, {})) as h:
            lines = h.analyse(START, depth=6)
            assert lines[0].move == parse_uci_move("e2e4")

    def test_missing_binary(self):
        with pytest.raises(EngineNotFound):
            EngineHandle(EngineProfile(command=("/no/such/engine-binary",)))

    def test_non_engine_times_out(self, tmp_path):
        profile = fake_profile(tmp_path, {"mute": True})
        with pytest.raises((HandshakeTimeout, EngineCrashed)):
            EngineHandle(profile, handshake_timeout=1.0)

    def test_rejected_option(self, tmp_path):
        profile = fake_profile(
            tmp_path, {"rejected_options": ["Hash"]}
        )
        with pytest.raises(OptionRejected):
            EngineHandle(profile)


class TestAnalyse:
    def test_multipv_two_lines(self, tmp_path):
        fen = START.fen()
        scenario = {
            "positions": {
                fen: [
                    "info depth 8 multipv 1 score cp 40 nodes 5000 pv e2e4 e7e5 g1f3",
                    "info depth 8 multipv 2 score cp 12 nodes 5000 pv d2d4 d7d5",
                    "bestmove e2e4",
                ]
            }
        }
        with EngineHandle(fake_profile(tmp_path, scenario)) as h:
            lines = h.analyse(START, depth=8, multipv=2)
        assert [l.rank for l in lines] == [1, 2]
        assert lines[0].eval_cp == 40 and lines[1].eval_cp == 12
        assert lines[0].pv[0] == parse_uci_move("e2e4")
        assert lines[0].eval_cp >= lines[1].eval_cp

    def test_single_legal_move_single_line(self, tmp_path):
        # Checked king with a single escape square.
        p = parse_fen("7k/6p1/8/7Q/8/8/8/K7 b - - 0 1")
        from puzzleforge.board import legal_moves
        assert len(legal_moves(p)) == 1
        fen = p.fen()
        scenario = {
            "positions": {
                fen: [
                    "info depth 6 multipv 1 score cp -900 nodes 100 pv h8g8",
                    "bestmove h8g8",
                ]
            }
        }
        with EngineHandle(fake_profile(tmp_path, scenario)) as h:
            lines = h.analyse(p, depth=6, multipv=2)
        assert len(lines) == 1
        assert lines[0].pv[0] == lines[0].move

    def test_mate_score_mapping(self, tmp_path):
        fen = START.fen()
        scenario = {
            "positions": {
                fen: [
                    "info depth 4 multipv 1 score mate 1 nodes 64 pv e2e4",
                    "bestmove e2e4",
                ]
            }
        }
        with EngineHandle(fake_profile(tmp_path, scenario)) as h:
            lines = h.analyse(START, depth=4)
        assert lines[0].eval_cp == mate_to_cp(1) == 99_999
        assert lines[0].is_mate_score

    def test_terminal_position_rejected(self, tmp_path):
        mate = parse_fen("5b1r/k2rqP2/BRR5/4P1p1/1n1N3p/8/3K1Q1P/1r6 w - - 0 1")
        from puzzleforge.notation import parse_line
        from puzzleforge.board import apply_move
        for m in parse_line(mate, ["Rb7+", "Rxb7", "Nb5+", "Kb8", "Qa7+", "Rxa7", "Rc8#"]):
            mate = apply_move(mate, m)
        with EngineHandle(fake_profile(tmp_path, {})) as h:
            with pytest.raises(ValueError):
                h.analyse(mate)

    def test_crash_respawns_once_then_succeeds(self, tmp_path):
        flag = tmp_path / "crashed-once"
        profile = fake_profile(tmp_path, {"crash_once_flagfile": str(flag)})
        with EngineHandle(profile) as h:
            lines = h.analyse(START, depth=6)  # crash, respawn, retry
            assert lines[0].move == parse_uci_move("e2e4")
        assert flag.exists()

    def test_persistent_crash_propagates(self, tmp_path):
        profile = fake_profile(tmp_path, {"crash_on_go": 1})
        with EngineHandle(profile) as h:
            with pytest.raises(EngineCrashed):
                h.analyse(START, depth=6)

    def test_partial_lines_do_not_deadlock(self, tmp_path):
        scenario = {
            "default_go": [
                "info depth 6 multipv 1 score cp 25 nodes 2048 pv e2e4 e7e5",
                "info depth 7 multipv 1 score cp 30 nodes 4096 pv d2d4 d7d5",
                "bestmove d2d4",
            ],
            "partial_line_delay": 0.4,
        }
        with EngineHandle(fake_profile(tmp_path, scenario)) as h:
            lines = h.analyse(START, depth=7)
        assert lines[0].move == parse_uci_move("d2d4")
        assert lines[0].depth == 7


class TestProtocolParsing:
    def test_garbage_info_raises(self, tmp_path):
        scenario = {
            "default_go": [
                "info depth banana multipv 1 score cp 25 nodes 10 pv e2e4",
                "bestmove e2e4",
            ]
        }
        with EngineHandle(fake_profile(tmp_path, scenario)) as h:
            with pytest.raises(ProtocolError):
                h.analyse(START, depth=6)

    def test_malformed_bestmove_raises(self, tmp_path):
        scenario = {
            "default_go": [
                "info depth 4 multipv 1 score cp 1 nodes 10 pv e2e4",
                "bestmove zz99",
            ]
        }
        with EngineHandle(fake_profile(tmp_path, scenario)) as h:
            with pytest.raises(ProtocolError):
                h.analyse(START, depth=4)

    def test_unknown_chatter_ignored(self, tmp_path):
        scenario = {
            "default_go": [
                "info string NNUE evaluation using nn.nnue",
                "this line is not uci at all",
                "info depth 5 multipv 1 score cp 7 nodes 99 pv g1f3",
                "bestmove g1f3",
            ]
        }
        with EngineHandle(fake_profile(tmp_path, scenario)) as h:
            lines = h.analyse(START, depth=5)
        assert lines[0].move == parse_uci_move("g1f3")

    def test_bound_scores_used_only_as_fallback(self):
        exact = _parse_info("info depth 9 multipv 1 score cp 33 nodes 1 pv e2e4")
        bound = _parse_info("info depth 9 multipv 1 score cp 50 lowerbound nodes 1 pv e2e4")
        assert exact["bound"] is False and bound["bound"] is True

    def test_mate_encoding_ordering(self):
        assert mate_to_cp(1) > mate_to_cp(2) > mate_to_cp(5) > 0
        assert mate_to_cp(-1) < mate_to_cp(-3) < 0
        assert mate_to_cp(1) > 90_000


class TestBestmoveStability:
    def test_stable_immediately(self, tmp_path):
        with EngineHandle(fake_profile(tmp_path, {})) as h:
            res = h.bestmove_stability(START, [2, 4, 6, 8])
        assert res.stable_move == parse_uci_move("e2e4")
        assert res.first_stable_depth == 2
        assert res.nodes_total == 2048 * 4

    def test_flipflop_never_stabilizes(self, tmp_path):
        profile = fake_profile(tmp_path, {"flipflop": ["e2e4", "d2d4"]})
        with EngineHandle(profile) as h:
            res = h.bestmove_stability(START, [2, 4, 6, 8])
        assert res.first_stable_depth is None
        assert res.stable_move is not None  # falls back to the last answer

    def test_schedule_must_ascend(self, tmp_path):
        with EngineHandle(fake_profile(tmp_path, {})) as h:
            with pytest.raises(ValueError):
                h.bestmove_stability(START, [8, 4])


class TestProfileResolution:
    def test_env_var_resolution(self, monkeypatch):
        from puzzleforge.uci import resolve_profile

        monkeypatch.setenv("STRONG_ENGINE", "node /opt/fake/engine.js --flag")
        profile = resolve_profile("strong")
        assert profile.command == ("node", "/opt/fake/engine.js", "--flag")
        assert profile.depth_limit == 12 and profile.role == "strong"

    def test_explicit_command_beats_env(self, monkeypatch):
        from puzzleforge.uci import resolve_profile

        monkeypatch.setenv("WEAK_ENGINE", "node /opt/unused.js")
        profile = resolve_profile("weak", command="python3 myengine.py", depth=4)
        assert profile.command == ("python3", "myengine.py")
        assert profile.depth_limit == 4

    def test_missing_engine_raises(self, monkeypatch, tmp_path):
        from puzzleforge.uci import EngineNotFound, resolve_profile

        monkeypatch.delenv("STRONG_ENGINE", raising=False)
        monkeypatch.chdir(tmp_path)  # no bundled engine in sight
        with pytest.raises(EngineNotFound):
            resolve_profile("strong")
