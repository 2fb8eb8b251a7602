"""Subprocess client for UCI engines.

Feeds positions to a child process over the UCI text protocol and parses
multi-line analysis back. Handles are single-owner: one thread drives one
handle at a time. Determinism mode (the default) pins threads=1 and a
fixed hash size and clears engine state before every search, so repeated
searches at a fixed depth return identical results.
"""

from __future__ import annotations

import os
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .board import Move, Position, legal_moves, parse_uci_move

MATE_BASE = 100_000

STRONG_ENGINE_ENV = "STRONG_ENGINE"
WEAK_ENGINE_ENV = "WEAK_ENGINE"


class EngineError(Exception):
    pass


class EngineNotFound(EngineError):
    pass


class HandshakeTimeout(EngineError):
    pass


class OptionRejected(EngineError):
    pass


class EngineCrashed(EngineError):
    pass


class ProtocolError(EngineError):
    pass


@dataclass(frozen=True)
class EngineProfile:
    """Launch configuration for one engine role."""

    command: tuple[str, ...]
    role: str = "strong"  # strong | weak
    depth_limit: int = 12
    node_limit: Optional[int] = None
    multipv: int = 1
    hash_mb: int = 64
    threads: int = 1
    extra_options: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_command(cls, command: str | Sequence[str], **kwargs) -> "EngineProfile":
        argv = tuple(shlex.split(command)) if isinstance(command, str) else tuple(command)
        return cls(command=argv, **kwargs)


def default_engine_command() -> Optional[str]:
    """Locate the bundled WASM engine relative to cwd or the repo tree."""
    here = os.getcwd()
    for base in (here, os.path.dirname(here), os.path.dirname(os.path.dirname(os.path.abspath(__file__)))):
        cand = os.path.join(
            base, "engines", "node_modules", "stockfish", "bin", "stockfish-18-lite-single.js"
        )
        if os.path.exists(cand):
            return f"node {cand}"
    return None


def resolve_profile(role: str, command: Optional[str] = None, depth: Optional[int] = None,
                    **kwargs) -> EngineProfile:
    """Build a profile from an explicit command, env var, or bundled default."""
    env_var = STRONG_ENGINE_ENV if role == "strong" else WEAK_ENGINE_ENV
    cmd = command or os.environ.get(env_var) or default_engine_command()
    if not cmd:
        raise EngineNotFound(
            f"no {role} engine configured: pass a command, set {env_var}, "
            "or install the bundled engine (see README)"
        )
    if depth is None:
        depth = 12 if role == "strong" else 4
    return EngineProfile.from_command(cmd, role=role, depth_limit=depth, **kwargs)


@dataclass(frozen=True)
class ScoredLine:
    rank: int
    move: Move
    eval_cp: int
    depth: int
    pv: tuple[Move, ...]
    nodes: int
    mate_in: Optional[int] = None

    @property
    def is_mate_score(self) -> bool:
        return abs(self.eval_cp) > MATE_BASE - 1000


def mate_to_cp(moves_to_mate: int) -> int:
    """Map 'mate in N moves' onto the centipawn axis as +/-(base - plies)."""
    if moves_to_mate > 0:
        return MATE_BASE - (2 * moves_to_mate - 1)
    return -(MATE_BASE - 2 * abs(moves_to_mate))


@dataclass
class StabilityResult:
    stable_move: Optional[Move]
    nodes_total: int
    first_stable_depth: Optional[int]  # None means never stabilized


class EngineHandle:
    """One running engine process, exclusively owned by its caller."""

    def __init__(self, profile: EngineProfile, handshake_timeout: float = 90.0):
        self.profile = profile
        self.handshake_timeout = handshake_timeout
        self._proc: Optional[subprocess.Popen] = None
        self._lines: queue.Queue[Optional[str]] = queue.Queue()
        self._reader: Optional[threading.Thread] = None
        self._spawn()

    # -- process management -------------------------------------------------

    def _spawn(self) -> None:
        try:
            self._proc = subprocess.Popen(
                list(self.profile.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except FileNotFoundError as exc:
            raise EngineNotFound(f"cannot start {self.profile.command!r}: {exc}") from exc
        self._lines = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._handshake()

    def _pump(self) -> None:
        proc = self._proc
        assert proc is not None and proc.stdout is not None
        for line in proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)  # EOF sentinel

    def _send(self, text: str) -> None:
        proc = self._proc
        if proc is None or proc.poll() is not None or proc.stdin is None:
            raise EngineCrashed("engine process is gone")
        try:
            proc.stdin.write(text + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EngineCrashed(f"write failed: {exc}") from exc

    def _read_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise HandshakeTimeout(
                f"engine {self.profile.command!r} silent for {timeout:.0f}s"
            ) from None
        if line is None:
            raise EngineCrashed("engine closed its output")
        return line

    def _wait_for(self, token: str, timeout: float) -> list[str]:
        seen = []
        while True:
            line = self._read_line(timeout)
            seen.append(line)
            if line.strip() == token or line.startswith(token + " "):
                return seen
            if line.startswith("No such option"):
                raise OptionRejected(line)

    def _handshake(self) -> None:
        self._send("uci")
        self._wait_for("uciok", self.handshake_timeout)
        self._set_option("Threads", str(self.profile.threads))
        self._set_option("Hash", str(self.profile.hash_mb))
        self._set_option("MultiPV", str(self.profile.multipv))
        for name, value in self.profile.extra_options.items():
            self._set_option(name, value)
        self._send("isready")
        self._wait_for("readyok", self.handshake_timeout)

    def _set_option(self, name: str, value: str) -> None:
        self._send(f"setoption name {name} value {value}")

    def close(self) -> None:
        proc = self._proc
        if proc is None:
            return
        try:
            if proc.poll() is None:
                try:
                    self._send("quit")
                except EngineCrashed:
                    pass
                try:
                    proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    proc.kill()
                    proc.wait(timeout=5)
        finally:
            for stream in (proc.stdin, proc.stdout):
                if stream:
                    try:
                        stream.close()
                    except OSError:
                        pass
            self._proc = None

    def __enter__(self) -> "EngineHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- analysis -----------------------------------------------------------

    def analyse(
        self,
        position: Position,
        depth: Optional[int] = None,
        multipv: Optional[int] = None,
        search_timeout: float = 600.0,
        fresh: bool = True,
    ) -> list[ScoredLine]:
        """Search a position, returning one ScoredLine per multipv rank.

        Crash policy: respawn once and retry once; a second failure
        propagates EngineCrashed for the caller to mark score-failed.
        """
        moves = legal_moves(position)
        if not moves:
            raise ValueError(f"no legal moves in {position.fen()}")
        try:
            return self._analyse_once(position, depth, multipv, search_timeout, fresh)
        except (EngineCrashed, HandshakeTimeout):
            self.close()
            self._spawn()
            return self._analyse_once(position, depth, multipv, search_timeout, fresh)

    def _analyse_once(self, position, depth, multipv, search_timeout, fresh) -> list[ScoredLine]:
        depth = depth if depth is not None else self.profile.depth_limit
        multipv = multipv if multipv is not None else self.profile.multipv
        if fresh:
            self._send("ucinewgame")
            self._send("isready")
            self._wait_for("readyok", self.handshake_timeout)
        self._set_option("MultiPV", str(multipv))
        self._send(f"position fen {position.fen()}")
        go = f"go depth {depth}"
        if self.profile.node_limit:
            go += f" nodes {self.profile.node_limit}"
        self._send(go)

        infos: dict[tuple[int, int], dict] = {}
        bound_infos: dict[tuple[int, int], dict] = {}
        while True:
            line = self._read_line(search_timeout)
            if line.startswith("bestmove"):
                best_text = _parse_bestmove(line)
                break
            if line.startswith("info ") and " pv " in line and " score " in line:
                parsed = _parse_info(line)
                if parsed is None:
                    continue
                key = (parsed["depth"], parsed["multipv"])
                if parsed.pop("bound"):
                    bound_infos[key] = parsed
                else:
                    infos[key] = parsed

        for key, parsed in bound_infos.items():
            infos.setdefault(key, parsed)
        if not infos:
            raise ProtocolError(f"engine produced no parseable analysis before {line!r}")

        lines: list[ScoredLine] = []
        for rank in range(1, multipv + 1):
            ranked = [info for (d, mpv), info in infos.items() if mpv == rank]
            if not ranked:
                continue
            info = max(ranked, key=lambda i: i["depth"])
            lines.append(
                ScoredLine(
                    rank=rank,
                    move=info["pv"][0],
                    eval_cp=info["eval_cp"],
                    depth=info["depth"],
                    pv=tuple(info["pv"]),
                    nodes=info["nodes"],
                    mate_in=info["mate_in"],
                )
            )
        if not lines:
            raise ProtocolError("no principal variation parsed")
        return lines

    def bestmove_stability(
        self, position: Position, depth_schedule: Sequence[int]
    ) -> StabilityResult:
        """Search at each scheduled depth; report when rank-1 stops moving.

        The stable move is the first to stay rank-1 for 3 consecutive
        schedule entries; nodes are summed over the whole schedule.
        """
        if list(depth_schedule) != sorted(depth_schedule):
            raise ValueError("depth schedule must be ascending")
        best_at: list[tuple[int, Move]] = []
        nodes_total = 0
        for d in depth_schedule:
            lines = self.analyse(position, depth=d, multipv=1)
            nodes_total += lines[0].nodes
            best_at.append((d, lines[0].move))
        stable_move = None
        first_stable_depth = None
        for i in range(len(best_at) - 2):
            a, b, c = best_at[i : i + 3]
            if a[1] == b[1] == c[1]:
                stable_move = a[1]
                first_stable_depth = a[0]
                break
        if stable_move is None:
            stable_move = best_at[-1][1] if best_at else None
        return StabilityResult(stable_move, nodes_total, first_stable_depth)


def _parse_bestmove(line: str) -> Optional[str]:
    parts = line.split()
    if len(parts) < 2:
        raise ProtocolError(f"malformed bestmove line {line!r}")
    if parts[1] == "(none)":
        return None
    try:
        parse_uci_move(parts[1])
    except ValueError as exc:
        raise ProtocolError(f"malformed bestmove line {line!r}") from exc
    return parts[1]


def _parse_info(line: str) -> Optional[dict]:
    """Parse one 'info ... score ... pv ...' record; None for depthless chatter."""
    tokens = line.split()
    out = {"multipv": 1, "nodes": 0, "bound": False, "mate_in": None}
    try:
        i = 0
        depth = None
        while i < len(tokens):
            tok = tokens[i]
            if tok == "depth":
                depth = int(tokens[i + 1])
                i += 2
            elif tok == "multipv":
                out["multipv"] = int(tokens[i + 1])
                i += 2
            elif tok == "nodes":
                out["nodes"] = int(tokens[i + 1])
                i += 2
            elif tok == "score":
                kind, value = tokens[i + 1], int(tokens[i + 2])
                if kind == "cp":
                    out["eval_cp"] = value
                elif kind == "mate":
                    out["eval_cp"] = mate_to_cp(value)
                    out["mate_in"] = value
                else:
                    raise ProtocolError(f"unknown score kind {kind!r} in {line!r}")
                i += 3
                if i < len(tokens) and tokens[i] in ("lowerbound", "upperbound"):
                    out["bound"] = True
                    i += 1
            elif tok == "pv":
                out["pv"] = [parse_uci_move(t) for t in tokens[i + 1 :]]
                break
            else:
                i += 1
        if depth is None or "eval_cp" not in out or not out.get("pv"):
            return None
        out["depth"] = depth
        return out
    except ProtocolError:
        raise
    except (ValueError, IndexError) as exc:
        raise ProtocolError(f"unparseable info line {line!r}") from exc


class EnginePair:
    """A strong and a weak handle owned together by one worker."""

    def __init__(self, strong: EngineProfile, weak: EngineProfile):
        self.strong = EngineHandle(strong)
        self.weak = EngineHandle(weak)

    def close(self) -> None:
        self.strong.close()
        self.weak.close()

    def __enter__(self) -> "EnginePair":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class EnginePool:
    """Fixed set of engine pairs served to workers through a queue."""

    def __init__(self, strong: EngineProfile, weak: EngineProfile, size: int = 1):
        self.size = size
        self._pairs = [EnginePair(strong, weak) for _ in range(size)]
        self._free: queue.Queue[EnginePair] = queue.Queue()
        for pair in self._pairs:
            self._free.put(pair)

    @property
    def strong_depth(self) -> int:
        return self._pairs[0].strong.profile.depth_limit

    def acquire(self) -> EnginePair:
        return self._free.get()

    def release(self, pair: EnginePair) -> None:
        self._free.put(pair)

    def map(self, fn, items):
        """Apply fn(item, pair) over items using all pairs; preserves order."""
        results = [None] * len(items)
        work: queue.Queue[tuple[int, object]] = queue.Queue()
        for i, item in enumerate(items):
            work.put((i, item))

        def worker():
            pair = self.acquire()
            try:
                while True:
                    try:
                        i, item = work.get_nowait()
                    except queue.Empty:
                        return
                    results[i] = fn(item, pair)
            finally:
                self.release(pair)

        threads = [threading.Thread(target=worker) for _ in range(self.size)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        return results

    def close(self) -> None:
        for pair in self._pairs:
            pair.close()

    def __enter__(self) -> "EnginePool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
