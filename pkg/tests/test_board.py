import pytest
from hypothesis import given, settings, strategies as st

from puzzleforge.board import (
    BLACK,
    WHITE,
    GAME_CHECKMATE,
    GAME_INSUFFICIENT,
    GAME_ONGOING,
    GAME_STALEMATE,
    IllegalMove,
    IllegalPosition,
    MalformedFen,
    Move,
    apply_move,
    game_state,
    in_check,
    legal_moves,
    material_balance,
    parse_fen,
    parse_square,
    parse_uci_move,
    perft,
    serialize_fen,
    starting_position,
    structural_violations,
    validate_realism,
)
from puzzleforge.notation import parse_line, parse_san, san

from booklet import FIXTURES, GOLDEN, SHOWCASE_AFTER_KEY, SHOWCASE_AFTER_LINE
from oracles import oracle_parse, perft_oracle


SHOWCASE_FEN = GOLDEN[0][1]


class TestParseFen:
    def test_two_field_showcase(self):
        p = parse_fen("1r1r2k1/Q2p1R1p/2p2R2/1p3pB1/1P4q1/8/5K2/8 w")
        assert p.side == WHITE
        assert p.piece_at(parse_square("a7")) == 5  # white queen
        assert p.piece_at(parse_square("f7")) == 4  # rook
        assert p.piece_at(parse_square("f6")) == 4  # rook
        assert p.castling == 0 and p.ep is None
        assert p.halfmove == 0 and p.fullmove == 1

    def test_bare_kings_corner_legal(self):
        p = parse_fen("8/8/8/8/8/8/8/K6k w - - 0 1")
        assert structural_violations(p) == []

    def test_rank_overflow(self):
        with pytest.raises(MalformedFen):
            parse_fen("9/8/8/8/8/8/8/8 w - - 0 1")

    def test_bad_field_count(self):
        with pytest.raises(MalformedFen):
            parse_fen("8/8/8/8/8/8/8/K6k w - - 0")

    def test_unknown_piece_letter(self):
        with pytest.raises(MalformedFen):
            parse_fen("7x/8/8/8/8/8/8/K6k w")

    def test_adjacent_kings_rejected(self):
        with pytest.raises(IllegalPosition) as exc:
            parse_fen("8/8/8/8/8/8/8/Kk6 w")
        assert "adjacent-kings" in exc.value.violations

    def test_pawn_on_back_rank_rejected(self):
        with pytest.raises(IllegalPosition) as exc:
            parse_fen("P7/8/8/8/8/8/8/K6k w")
        assert "pawn-on-back-rank" in exc.value.violations

    def test_non_mover_in_check_rejected(self):
        # White queen attacks the black king while black is not to move.
        with pytest.raises(IllegalPosition) as exc:
            parse_fen("7k/8/8/8/8/8/8/K6Q w")
        assert "non-mover-in-check" in exc.value.violations

    def test_castling_rights_need_rooks(self):
        with pytest.raises(IllegalPosition):
            parse_fen("4k3/8/8/8/8/8/8/4K3 w KQkq - 0 1")
        p = parse_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1")
        assert p.castling == 0b1111


class TestSerializeFen:
    def test_round_trip_six_field(self):
        text = "rnbqrbk1/pp3Rp1/2p1p1N1/3p1P1Q/3PnB2/2P5/PP3P1P/6K1 w - - 0 1"
        assert serialize_fen(parse_fen(text)) == text

    def test_bare_kings_round_trip(self):
        text = "8/8/8/8/8/8/8/K6k w - - 0 1"
        assert serialize_fen(parse_fen(text)) == text

    def test_round_trip_identity_on_fixtures(self):
        for _, fen, _ in FIXTURES:
            canon = serialize_fen(parse_fen(fen))
            again = parse_fen(canon)
            assert serialize_fen(again) == canon
            assert again == parse_fen(fen)


class TestLegalMoves:
    def test_mate_position_has_no_moves(self):
        # Forced-mate fixture played to the final mating move.
        theme, fen, line = FIXTURES[2]
        p = parse_fen(fen)
        for m in parse_line(p, line):
            p = apply_move(p, m)
        assert legal_moves(p) == []
        assert in_check(p)
        assert game_state(p) == GAME_CHECKMATE

    def test_bare_kings_corner_count(self):
        p = parse_fen("k7/8/8/8/8/8/8/7K w")
        assert len(legal_moves(p)) == 3

    def test_deterministic_order(self):
        p = starting_position()
        moves = legal_moves(p)
        assert moves == sorted(moves, key=lambda m: (m.from_sq, m.to_sq, m.promotion or 0))

    def test_perft_against_oracle_on_showcase(self):
        for depth in (1, 2, 3):
            assert perft(parse_fen(SHOWCASE_FEN), depth) == perft_oracle(
                oracle_parse(SHOWCASE_FEN), depth
            )


class TestApplyMove:
    def test_showcase_key_move_diagram(self):
        p = parse_fen(SHOWCASE_FEN)
        after = apply_move(p, parse_uci_move("f6g6"))
        assert serialize_fen(after) == SHOWCASE_AFTER_KEY
        assert in_check(after)

    def test_showcase_full_line_diagram(self):
        p = parse_fen(SHOWCASE_FEN)
        for m in parse_line(p, GOLDEN[0][3]):
            p = apply_move(p, m)
        assert serialize_fen(p) == SHOWCASE_AFTER_LINE

    def test_value_semantics(self):
        p = parse_fen(SHOWCASE_FEN)
        before = serialize_fen(p)
        apply_move(p, legal_moves(p)[0])
        assert serialize_fen(p) == before

    def test_quiet_king_shuffle_restores_board(self):
        p = parse_fen("4k3/8/8/8/8/8/8/4K3 w - - 0 1")
        q = apply_move(p, parse_uci_move("e1d1"))
        q = apply_move(q, parse_uci_move("e8d8"))
        q = apply_move(q, parse_uci_move("d1e1"))
        q = apply_move(q, parse_uci_move("d8e8"))
        assert q.board == p.board
        assert q.halfmove != p.halfmove

    def test_illegal_move_rejected(self):
        p = starting_position()
        with pytest.raises(IllegalMove):
            apply_move(p, parse_uci_move("e2e5"))

    def test_stalemate_line_playout(self):
        theme, fen, line = next(f for f in FIXTURES if f[0] == "stalemate-sacrifice")
        p = parse_fen(fen)
        for m in parse_line(p, line):
            p = apply_move(p, m)
        assert game_state(p) == GAME_STALEMATE

    def test_castling_moves_rook(self):
        p = parse_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1")
        after = apply_move(p, parse_uci_move("e1g1"))
        assert serialize_fen(after).startswith("r3k2r/8/8/8/8/8/8/R4RK1 b kq")

    def test_en_passant_capture(self):
        p = parse_fen("4k3/8/8/8/4p3/8/3P4/4K3 w - - 0 1")
        p = apply_move(p, parse_uci_move("d2d4"))
        assert p.ep is not None
        p = apply_move(p, parse_uci_move("e4d3"))
        assert p.board[parse_uci_move("d4d4").from_sq] == 0


class TestGameState:
    def test_starting_ongoing(self):
        assert game_state(starting_position()) == GAME_ONGOING

    def test_kb_vs_k_insufficient(self):
        assert game_state(parse_fen("4k3/8/8/8/8/8/2B5/4K3 w")) == GAME_INSUFFICIENT

    def test_stalemate_after_long_save_line(self):
        _, fen, _, line = GOLDEN[7]
        p = parse_fen(fen)
        for m in parse_line(p, line):
            p = apply_move(p, m)
        assert game_state(p) == GAME_STALEMATE


class TestMaterialBalance:
    def test_bare_kings_zero(self):
        assert material_balance(parse_fen("k7/8/8/8/8/8/8/7K w")) == 0

    def test_queen_vs_rook(self):
        p = parse_fen("7k/8/8/7r/8/8/8/K2Q4 w - - 0 1")
        assert material_balance(p) == 400

    def test_antisymmetry(self):
        for _, fen, _, _ in GOLDEN:
            p = parse_fen(fen)
            flipped = parse_fen(
                serialize_fen(p).replace(" w ", " @ ").replace(" b ", " w ").replace(" @ ", " b "),
                strict=False,
            )
            assert material_balance(p) == -material_balance(flipped)

    def test_counting_oracle(self):
        # Independent piece-count tally on a showcase board.
        _, fen, _, _ = GOLDEN[3]
        values = {"p": 100, "n": 320, "b": 330, "r": 500, "q": 900, "k": 0}
        board_field = fen.split()[0]
        white = sum(values[c.lower()] for c in board_field if c.isalpha() and c.isupper())
        black = sum(values[c] for c in board_field if c.isalpha() and c.islower())
        assert material_balance(parse_fen(fen)) == white - black


class TestValidateRealism:
    def test_showcase_clean(self):
        assert validate_realism(parse_fen(SHOWCASE_FEN)) == []

    def test_two_kings_flagged(self):
        p = parse_fen("K6k/8/8/8/8/8/8/K7 w", strict=False)
        assert "multiple-kings" in validate_realism(p)

    def test_promotion_inconsistency_flagged(self):
        # Three queens with a full pawn set cannot come from promotions.
        fen = "3qk3/pppppppp/8/2q5/5q2/8/8/4K3 w"
        violations = validate_realism(parse_fen(fen, strict=False))
        assert any(v.startswith("promotion-inconsistent") for v in violations)

    def test_chaotic_board_is_count_consistent(self):
        # Extras are covered by missing pawns on both sides, so the
        # counting rule deems this wild tableau reachable.
        fen = "1R2Q1r1/P2nP2r/bP3QnB/R1R3P1/3b3r/6K1/1k3pbR/5b2 b - - 0 1"
        assert validate_realism(parse_fen(fen, strict=False)) == []

    def test_nine_pawns_flagged(self):
        p = parse_fen("4k3/pppppppp/p7/8/8/8/8/4K3 w", strict=False)
        assert "too-many-pawns-black" in validate_realism(p)


@st.composite
def random_reachable_position(draw):
    """Play random legal moves from the start; always yields a valid position."""
    p = starting_position()
    for _ in range(draw(st.integers(min_value=0, max_value=40))):
        moves = legal_moves(p)
        if not moves:
            break
        p = apply_move(p, moves[draw(st.integers(min_value=0, max_value=len(moves) - 1))])
    return p


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(random_reachable_position())
    def test_round_trip(self, p):
        assert parse_fen(serialize_fen(p)) == p

    @settings(max_examples=40, deadline=None)
    @given(random_reachable_position())
    def test_legality_closure(self, p):
        for m in legal_moves(p)[:8]:
            after = apply_move(p, m, check_legal=False)
            assert structural_violations(after) == []

    @settings(max_examples=40, deadline=None)
    @given(random_reachable_position())
    def test_terminal_classification(self, p):
        state = game_state(p)
        if state == GAME_CHECKMATE:
            assert not legal_moves(p) and in_check(p)
        elif state == GAME_STALEMATE:
            assert not legal_moves(p) and not in_check(p)


class TestNotation:
    def test_san_round_trip_on_fixture_lines(self):
        for _, fen, line in FIXTURES:
            p = parse_fen(fen)
            for token in line:
                m = parse_san(p, token)
                rendered = san(p, m)
                assert parse_san(p, rendered) == m
                p = apply_move(p, m)

    def test_underpromotion_san(self):
        q = parse_fen("8/6P1/5k2/8/8/8/8/4K3 w")
        m = parse_san(q, "g8=N")
        assert m.promotion == 2 and san(q, m) == "g8=N+"
