/**
 * Mask grid geometry: decoding mask payloads and translating pointer
 * rectangles on the rendered pixel grid into the API's grid-coordinate
 * rectangle edits.
 *
 * The server defines the layout (one grid row per out-channel; a conv row is
 * `in_ch` kernel blocks of `kh*kw` cells and renders `row_span` pixel rows
 * tall). Everything here is pure so the selection math is testable against
 * recorded API responses.
 */

import type { MaskGeometry, MaskView } from "./types";

export interface GridRect {
  row0: number;
  col0: number;
  row1: number;
  col1: number;
}

/** Inclusive rectangle in *pixel* coordinates of the rendered grid. */
export interface PixelRect {
  r0: number;
  c0: number;
  r1: number;
  c1: number;
}

function b64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(b64, "base64"));
}

/** Unpack a base64 little-bit-order packed mask into 0/1 flags. */
export function decodeBits(b64: string, total: number): Uint8Array {
  const bytes = b64ToBytes(b64);
  const out = new Uint8Array(total);
  for (let i = 0; i < total; i++) {
    out[i] = (bytes[i >> 3] >> (i & 7)) & 1;
  }
  return out;
}

/** Expand `[value, run_length]` pairs into 0/1 flags. */
export function decodeRuns(runs: [number, number][], total: number): Uint8Array {
  const out = new Uint8Array(total);
  let pos = 0;
  for (const [value, length] of runs) {
    out.fill(value, pos, pos + length);
    pos += length;
  }
  if (pos !== total) {
    throw new Error(`run lengths cover ${pos} cells, expected ${total}`);
  }
  return out;
}

export function decodeMaskView(view: MaskView): Uint8Array {
  if (view.format === "rle") {
    return decodeRuns(view.runs ?? [], view.total);
  }
  return decodeBits(view.bits ?? "", view.total);
}

/** Flat indices whose mask value changed between two decoded masks. */
export function maskDiff(before: Uint8Array, after: Uint8Array): number[] {
  const changed: number[] = [];
  for (let i = 0; i < before.length; i++) {
    if (before[i] !== after[i]) changed.push(i);
  }
  return changed;
}

export function pixelWidth(geo: MaskGeometry): number {
  return geo.kind === "conv2d" ? (geo.in_ch ?? 1) * (geo.kw ?? 1) : geo.cols;
}

export function pixelHeight(geo: MaskGeometry): number {
  return geo.rows * geo.row_span;
}

/** Grid cell under a pixel of the rendered grid. */
export function pixelToCell(
  geo: MaskGeometry,
  pr: number,
  pc: number,
): { row: number; col: number } {
  if (geo.kind === "dense") return { row: pr, col: pc };
  const kh = geo.kh ?? 1;
  const kw = geo.kw ?? 1;
  const row = Math.floor(pr / geo.row_span);
  const ky = pr % geo.row_span;
  const block = Math.floor(pc / kw);
  const kx = pc % kw;
  return { row, col: block * kh * kw + ky * kw + kx };
}

/** Pixel of the rendered grid for a cell; inverse of pixelToCell. */
export function cellToPixel(
  geo: MaskGeometry,
  row: number,
  col: number,
): { pr: number; pc: number } {
  if (geo.kind === "dense") return { pr: row, pc: col };
  const kh = geo.kh ?? 1;
  const kw = geo.kw ?? 1;
  const block = Math.floor(col / (kh * kw));
  const within = col % (kh * kw);
  const ky = Math.floor(within / kw);
  const kx = within % kw;
  return { pr: row * geo.row_span + ky, pc: block * kw + kx };
}

export function cellToFlat(geo: MaskGeometry, row: number, col: number): number {
  return row * geo.cols + col;
}

/** All flat indices inside an inclusive grid-coordinate rectangle. */
export function cellsInRect(geo: MaskGeometry, rect: GridRect): number[] {
  const out: number[] = [];
  for (let r = rect.row0; r <= rect.row1; r++) {
    for (let c = rect.col0; c <= rect.col1; c++) {
      out.push(cellToFlat(geo, r, c));
    }
  }
  return out;
}

/**
 * Decompose an inclusive pixel rectangle into grid-coordinate rectangles.
 *
 * On a dense grid the pixel rect *is* a grid rect. On a conv grid the cells
 * under a pixel rect are not contiguous in grid columns, so the selection
 * becomes one grid rect per (out-channel row, kernel block, kernel row)
 * combination, emitted in that loop order.
 */
export function rectsForPixelRect(geo: MaskGeometry, px: PixelRect): GridRect[] {
  if (geo.kind === "dense") {
    return [{ row0: px.r0, col0: px.c0, row1: px.r1, col1: px.c1 }];
  }
  const kh = geo.kh ?? 1;
  const kw = geo.kw ?? 1;
  const span = geo.row_span;
  const rects: GridRect[] = [];
  const r0 = Math.floor(px.r0 / span);
  const r1 = Math.floor(px.r1 / span);
  const i0 = Math.floor(px.c0 / kw);
  const i1 = Math.floor(px.c1 / kw);
  for (let r = r0; r <= r1; r++) {
    const kyLo = r === r0 ? px.r0 - r * span : 0;
    const kyHi = r === r1 ? px.r1 - r * span : span - 1;
    for (let i = i0; i <= i1; i++) {
      const kx0 = i === i0 ? px.c0 - i * kw : 0;
      const kx1 = i === i1 ? px.c1 - i * kw : kw - 1;
      for (let ky = kyLo; ky <= kyHi; ky++) {
        const base = i * kh * kw + ky * kw;
        rects.push({ row0: r, col0: base + kx0, row1: r, col1: base + kx1 });
      }
    }
  }
  return rects;
}

/** Flat indices of every cell a pixel rectangle selects, ascending. */
export function cellsForPixelRect(geo: MaskGeometry, px: PixelRect): number[] {
  const cells = rectsForPixelRect(geo, px).flatMap((rect) => cellsInRect(geo, rect));
  return cells.sort((a, b) => a - b);
}

/** Normalize a drag between two pixels into an inclusive pixel rect. */
export function dragToPixelRect(
  aRow: number,
  aCol: number,
  bRow: number,
  bCol: number,
): PixelRect {
  return {
    r0: Math.min(aRow, bRow),
    c0: Math.min(aCol, bCol),
    r1: Math.max(aRow, bRow),
    c1: Math.max(aCol, bCol),
  };
}
