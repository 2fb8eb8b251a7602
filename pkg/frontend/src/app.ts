/** DOM glue: render the queue and board from AppState, wire events. */

import { ReviewApi, ApiError } from "./api.js";
import { boardSvg } from "./board.js";
import {
  AppState,
  applyVerdict,
  candidateOpened,
  connectionFailed,
  currentFen,
  initialState,
  keyToAction,
  maxCursor,
  queueLoaded,
  revealSolution,
  stepSolution,
  verdictConfirmed,
  verdictFailed,
} from "./state.js";

const THEMES = [
  "sacrifice",
  "underpromotion",
  "attacking-withdrawal",
  "knight-on-rim",
  "stalemate-sacrifice",
  "novotny",
  "interference",
  "unprotected-position",
  "xray",
  "paralysis",
  "bristol",
  "king-on-tour",
  "switchback",
  "smothered-mate",
];

export class CurationApp {
  state: AppState = initialState();
  reviewer: string;

  constructor(
    private root: HTMLElement,
    private api: ReviewApi,
    reviewer = "curator",
  ) {
    this.reviewer = reviewer;
  }

  async start(): Promise<void> {
    this.render();
    await this.loadQueue(this.state.theme, this.state.status);
    document.addEventListener("keydown", (event) => {
      const action = keyToAction(event.key);
      if (!action) return;
      event.preventDefault();
      void this.dispatch(action);
    });
  }

  async dispatch(action: NonNullable<ReturnType<typeof keyToAction>>): Promise<void> {
    if (action.kind === "step") {
      this.state = stepSolution(this.state, action.direction);
      this.render();
    } else if (action.kind === "reveal") {
      this.state = revealSolution(this.state);
      this.render();
    } else if (action.kind === "verdict") {
      await this.submitVerdict(action.decision);
    }
  }

  async loadQueue(theme: string, status: string): Promise<void> {
    this.state = { ...this.state, theme, status };
    try {
      const page = await this.api.listCandidates({
        theme,
        status,
        sort: "reward",
        limit: 50,
      });
      this.state = queueLoaded(this.state, page.items, page.total);
    } catch (err) {
      this.state = connectionFailed(this.state, describe(err));
    }
    this.render();
  }

  async open(index: number): Promise<void> {
    const item = this.state.queue[index];
    if (!item) return;
    try {
      const detail = await this.api.getCandidate(item.id);
      this.state = candidateOpened(this.state, index, detail);
    } catch (err) {
      this.state = connectionFailed(this.state, describe(err));
    }
    this.render();
  }

  async submitVerdict(decision: "accepted" | "rejected"): Promise<void> {
    const applied = applyVerdict(this.state, decision);
    if (!applied.id) return;
    this.state = applied.state;
    this.render();
    try {
      await this.api.postVerdict(applied.id, decision, this.reviewer);
      this.state = verdictConfirmed(this.state);
      if (this.state.openIndex !== null) {
        await this.open(this.state.openIndex);
        return;
      }
    } catch (err) {
      this.state = verdictFailed(applied.snapshot, describe(err));
    }
    this.render();
  }

  render(): void {
    const { state } = this;
    const banner = state.banner
      ? `<div class="banner" role="alert">${escapeHtml(state.banner)}</div>`
      : "";
    const options = THEMES.map(
      (t) =>
        `<option value="${t}"${t === state.theme ? " selected" : ""}>${t}</option>`,
    ).join("");
    const rows = state.queue
      .map((item, i) => {
        const open = i === state.openIndex ? " open" : "";
        const verdict = item.verdict ? ` [${item.verdict}]` : "";
        return (
          `<li class="queue-item${open}" data-index="${i}">` +
          `<span class="badge reward">${item.reward.toFixed(2)}</span>` +
          `<span class="badge ci">${item.ci_score.toFixed(2)}</span>` +
          `<span class="themes">${item.themes.join(", ")}</span>` +
          `<code>${item.id.slice(0, 8)}</code>${verdict}</li>`
        );
      })
      .join("");
    const queueHtml = state.queue.length
      ? `<ol class="queue">${rows}</ol>`
      : `<p class="empty">No candidates for this filter.</p>`;

    this.root.innerHTML = `
      ${banner}
      <header>
        <label>Theme <select id="theme">${options}</select></label>
        <label>Status <select id="status">
          <option value="pending"${state.status === "pending" ? " selected" : ""}>pending</option>
          <option value="all"${state.status === "all" ? " selected" : ""}>all</option>
          <option value="accepted"${state.status === "accepted" ? " selected" : ""}>accepted</option>
          <option value="rejected"${state.status === "rejected" ? " selected" : ""}>rejected</option>
        </select></label>
      </header>
      <main>
        <section class="list">${queueHtml}</section>
        <section class="viewer">${this.viewerHtml()}</section>
      </main>`;

    this.root.querySelector("#theme")?.addEventListener("change", (event) => {
      void this.loadQueue((event.target as HTMLSelectElement).value, state.status);
    });
    this.root.querySelector("#status")?.addEventListener("change", (event) => {
      void this.loadQueue(state.theme, (event.target as HTMLSelectElement).value);
    });
    this.root.querySelectorAll(".queue-item").forEach((el) => {
      el.addEventListener("click", () => {
        void this.open(Number((el as HTMLElement).dataset.index));
      });
    });
    this.root.querySelector("#accept")?.addEventListener("click", () => {
      void this.submitVerdict("accepted");
    });
    this.root.querySelector("#reject")?.addEventListener("click", () => {
      void this.submitVerdict("rejected");
    });
    this.root.querySelector("#next")?.addEventListener("click", () => {
      this.state = stepSolution(this.state, "next");
      this.render();
    });
    this.root.querySelector("#prev")?.addEventListener("click", () => {
      this.state = stepSolution(this.state, "prev");
      this.render();
    });
    this.root.querySelector("#reset")?.addEventListener("click", () => {
      this.state = stepSolution(this.state, "reset");
      this.render();
    });
    this.root.querySelector("#reveal")?.addEventListener("click", () => {
      this.state = revealSolution(this.state);
      this.render();
    });
  }

  viewerHtml(): string {
    const board = this.state.board;
    if (!board) return `<p class="empty">Select a candidate to review.</p>`;
    const { detail } = board;
    const svg = boardSvg(currentFen(board), board.orientation);
    const sanLine = board.revealed
      ? detail.solution_san
          .map((san, i) => {
            const active = i === board.cursor - 1 ? ' class="played"' : "";
            return `<span${active}>${san}</span>`;
          })
          .join(" ")
      : `<button id="reveal">Reveal solution</button>`;
    return `
      <div class="board-wrap" data-cursor="${board.cursor}" data-max="${maxCursor(board)}">${svg}</div>
      <div class="controls">
        <button id="reset">|&lt;</button>
        <button id="prev">&lt;</button>
        <button id="next">&gt;</button>
        <a href="${detail.analysis_url}" target="_blank" rel="noreferrer">Analyse on Lichess</a>
      </div>
      <div class="line">${sanLine}</div>
      <div class="meta">
        reward ${detail.reward.toFixed(2)} · tricky ${detail.ci_score.toFixed(2)}
        · themes: ${detail.themes.join(", ") || "none"}
      </div>
      <div class="verdict">
        <button id="accept">Accept (a)</button>
        <button id="reject">Reject (r)</button>
      </div>`;
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `service error ${err.status}: ${err.message}`;
  return `service unreachable: ${String(err)}`;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

export function mount(selector = "#app", baseUrl = ""): CurationApp {
  const root = document.querySelector(selector);
  if (!root) throw new Error(`no mount point ${selector}`);
  const app = new CurationApp(root as HTMLElement, new ReviewApi(baseUrl));
  void app.start();
  return app;
}
