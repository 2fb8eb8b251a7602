/** SVG board rendering straight from a FEN string. Rendering is pure
 * string construction so it is testable without a DOM. */

const PIECE_GLYPHS: Record<string, string> = {
  K: "♔",
  Q: "♕",
  R: "♖",
  B: "♗",
  N: "♘",
  P: "♙",
  k: "♚",
  q: "♛",
  r: "♜",
  b: "♝",
  n: "♞",
  p: "♟",
};

const LIGHT = "#f0d9b5";
const DARK = "#b58863";
const SQUARE = 46;

export interface BoardGrid {
  /** 8 ranks from rank 8 down to rank 1, each 8 entries, "" when empty. */
  ranks: string[][];
  sideToMove: "w" | "b";
}

export function parseBoardFen(fen: string): BoardGrid {
  const fields = fen.trim().split(/\s+/);
  if (fields.length < 2) throw new Error(`bad FEN: ${fen}`);
  const rows = fields[0].split("/");
  if (rows.length !== 8) throw new Error(`bad FEN board: ${fields[0]}`);
  const ranks = rows.map((row) => {
    const out: string[] = [];
    for (const ch of row) {
      if (/[1-8]/.test(ch)) {
        for (let i = 0; i < Number(ch); i++) out.push("");
      } else if (PIECE_GLYPHS[ch]) {
        out.push(ch);
      } else {
        throw new Error(`bad FEN piece: ${ch}`);
      }
    }
    if (out.length !== 8) throw new Error(`bad FEN rank: ${row}`);
    return out;
  });
  const side = fields[1] === "b" ? "b" : "w";
  return { ranks, sideToMove: side };
}

/** Render a position; orientation puts that color's first rank at the bottom. */
export function boardSvg(fen: string, orientation: "w" | "b"): string {
  const grid = parseBoardFen(fen);
  const size = SQUARE * 8;
  const cells: string[] = [];
  for (let r = 0; r < 8; r++) {
    for (let f = 0; f < 8; f++) {
      // grid.ranks[0] is rank 8; flip both axes for black orientation.
      const rank = orientation === "w" ? r : 7 - r;
      const file = orientation === "w" ? f : 7 - f;
      const piece = grid.ranks[rank][file];
      const x = f * SQUARE;
      const y = r * SQUARE;
      const shade = (rank + file) % 2 === 0 ? LIGHT : DARK;
      cells.push(
        `<rect x="${x}" y="${y}" width="${SQUARE}" height="${SQUARE}" fill="${shade}"/>`,
      );
      if (piece) {
        const glyph = PIECE_GLYPHS[piece];
        cells.push(
          `<text x="${x + SQUARE / 2}" y="${y + SQUARE * 0.72}" ` +
            `font-size="${SQUARE * 0.82}" text-anchor="middle" ` +
            `data-piece="${piece}">${glyph}</text>`,
        );
      }
    }
  }
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${size} ${size}" ` +
    `class="board" data-orientation="${orientation}">` +
    cells.join("") +
    `</svg>`
  );
}
