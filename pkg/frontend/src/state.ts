/** View-model for the curation session: a queue of candidates, one open
 * board with a ply cursor, and verdict bookkeeping with optimistic
 * updates that roll back on request failure.
 *
 * All transitions are pure functions over AppState so they can be
 * tested without a DOM or a server.
 */

import type { CandidateDetail, CandidateSummary } from "./api.js";

export interface BoardView {
  detail: CandidateDetail;
  cursor: number; // 0 = diagram, N = after line[N-1]
  revealed: boolean; // solution hidden until the curator asks
  orientation: "w" | "b";
}

export interface AppState {
  theme: string;
  status: string;
  queue: CandidateSummary[];
  queueTotal: number;
  openIndex: number | null;
  board: BoardView | null;
  banner: string | null; // connection / error banner text
  busy: boolean;
}

export function initialState(theme = "sacrifice", status = "pending"): AppState {
  return {
    theme,
    status,
    queue: [],
    queueTotal: 0,
    openIndex: null,
    board: null,
    banner: null,
    busy: false,
  };
}

export function queueLoaded(
  state: AppState,
  items: CandidateSummary[],
  total: number,
): AppState {
  return { ...state, queue: items, queueTotal: total, banner: null };
}

export function connectionFailed(state: AppState, message: string): AppState {
  return { ...state, banner: message, busy: false };
}

export function candidateOpened(
  state: AppState,
  index: number,
  detail: CandidateDetail,
): AppState {
  const board: BoardView = {
    detail,
    cursor: 0,
    revealed: false,
    // Side to move at the bottom, matching the printed diagrams.
    orientation: detail.side_to_move,
  };
  return { ...state, openIndex: index, board, banner: null };
}

export function maxCursor(board: BoardView): number {
  return board.detail.solution_uci.length;
}

/** The board always shows the server-computed FEN for the cursor. */
export function currentFen(board: BoardView): string {
  return board.detail.fens_by_ply[board.cursor];
}

export type StepDirection = "next" | "prev" | "reset";

export function stepSolution(state: AppState, direction: StepDirection): AppState {
  const board = state.board;
  if (!board) return state;
  let cursor = board.cursor;
  if (direction === "next") cursor = Math.min(cursor + 1, maxCursor(board));
  if (direction === "prev") cursor = Math.max(cursor - 1, 0);
  if (direction === "reset") cursor = 0;
  const revealed = board.revealed || cursor > 0;
  return { ...state, board: { ...board, cursor, revealed } };
}

export function revealSolution(state: AppState): AppState {
  if (!state.board) return state;
  return { ...state, board: { ...state.board, revealed: true } };
}

export interface VerdictApplication {
  state: AppState;
  /** Candidate id the verdict applies to; null when nothing is open. */
  id: string | null;
  /** Snapshot for rollback if the POST fails. */
  snapshot: AppState;
}

/** Optimistically mark the open candidate and advance to the next
 * pending item; the caller POSTs and calls verdictFailed on error. */
export function applyVerdict(
  state: AppState,
  decision: "accepted" | "rejected",
): VerdictApplication {
  if (state.openIndex === null || !state.board) {
    return { state, id: null, snapshot: state };
  }
  const snapshot = state;
  const id = state.board.detail.id;
  const queue = state.queue.map((item) =>
    item.id === id ? { ...item, verdict: decision } : item,
  );
  const next = nextPendingIndex(queue, state.openIndex);
  const cleared: AppState = {
    ...state,
    queue,
    openIndex: next,
    board: next === null ? null : state.board,
    busy: true,
  };
  return { state: cleared, id, snapshot };
}

export function verdictConfirmed(state: AppState): AppState {
  return { ...state, busy: false };
}

export function verdictFailed(snapshot: AppState, message: string): AppState {
  return { ...snapshot, banner: message, busy: false };
}

export function nextPendingIndex(
  queue: CandidateSummary[],
  from: number,
): number | null {
  for (let i = from + 1; i < queue.length; i++) {
    if (!queue[i].verdict) return i;
  }
  for (let i = 0; i <= Math.min(from, queue.length - 1); i++) {
    if (!queue[i].verdict) return i;
  }
  return null;
}

export function pendingItems(queue: CandidateSummary[]): CandidateSummary[] {
  return queue.filter((item) => !item.verdict);
}

/** Keyboard map: the shortcuts must behave exactly like the buttons. */
export type UiAction =
  | { kind: "verdict"; decision: "accepted" | "rejected" }
  | { kind: "step"; direction: StepDirection }
  | { kind: "reveal" }
  | null;

export function keyToAction(key: string): UiAction {
  switch (key) {
    case "a":
      return { kind: "verdict", decision: "accepted" };
    case "r":
      return { kind: "verdict", decision: "rejected" };
    case "ArrowRight":
      return { kind: "step", direction: "next" };
    case "ArrowLeft":
      return { kind: "step", direction: "prev" };
    case "Home":
      return { kind: "step", direction: "reset" };
    case " ":
      return { kind: "reveal" };
    default:
      return null;
  }
}
