/**
 * MaskCanvas - renders a layer mask as a pixel grid and turns pointer drags
 * into rectangle edits. Kept cells are light, pruned cells red; kernel-block
 * boundaries get separator lines on conv grids.
 */

import {
  cellToFlat,
  dragToPixelRect,
  cellsForPixelRect,
  pixelToCell,
  pixelHeight,
  pixelWidth,
  rectsForPixelRect,
  type GridRect,
  type PixelRect,
} from "./maskGrid";
import type { MaskGeometry } from "./types";

const COLORS = {
  kept: "#e8e8f0",
  pruned: "#d64545",
  selection: "rgba(80, 140, 255, 0.45)",
  blockLine: "#9090a8",
  rowLine: "#606078",
};

const CELL = 14;

export class MaskCanvas {
  private ctx: CanvasRenderingContext2D;
  private geometry: MaskGeometry | null = null;
  private mask: Uint8Array | null = null;
  private dragStart: { pr: number; pc: number } | null = null;
  private dragEnd: { pr: number; pc: number } | null = null;

  /** Called with the grid rects of a finished drag and the cells they cover. */
  public onRectSelected: ((rects: GridRect[], cells: number[]) => void) | null = null;

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("Could not get 2d context");
    this.ctx = ctx;
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", (e) => this.pointerUp(e));
  }

  setMask(geometry: MaskGeometry, mask: Uint8Array): void {
    this.geometry = geometry;
    this.mask = mask;
    this.canvas.width = pixelWidth(geometry) * CELL;
    this.canvas.height = pixelHeight(geometry) * CELL;
    this.draw();
  }

  private eventPixel(e: PointerEvent): { pr: number; pc: number } | null {
    if (!this.geometry) return null;
    const bounds = this.canvas.getBoundingClientRect();
    const pc = Math.floor((e.clientX - bounds.left) / CELL);
    const pr = Math.floor((e.clientY - bounds.top) / CELL);
    if (pr < 0 || pc < 0) return null;
    if (pr >= pixelHeight(this.geometry) || pc >= pixelWidth(this.geometry)) return null;
    return { pr, pc };
  }

  private pointerDown(e: PointerEvent): void {
    const px = this.eventPixel(e);
    if (!px) return;
    this.canvas.setPointerCapture(e.pointerId);
    this.dragStart = px;
    this.dragEnd = px;
    this.draw();
  }

  private pointerMove(e: PointerEvent): void {
    if (!this.dragStart) return;
    const px = this.eventPixel(e);
    if (!px) return;
    this.dragEnd = px;
    this.draw();
  }

  private pointerUp(e: PointerEvent): void {
    if (!this.dragStart || !this.dragEnd || !this.geometry) return;
    const rect = dragToPixelRect(
      this.dragStart.pr,
      this.dragStart.pc,
      this.dragEnd.pr,
      this.dragEnd.pc,
    );
    const rects = rectsForPixelRect(this.geometry, rect);
    const cells = cellsForPixelRect(this.geometry, rect);
    this.dragStart = null;
    this.dragEnd = null;
    this.canvas.releasePointerCapture(e.pointerId);
    this.draw();
    if (this.onRectSelected) this.onRectSelected(rects, cells);
  }

  private selectionRect(): PixelRect | null {
    if (!this.dragStart || !this.dragEnd) return null;
    return dragToPixelRect(
      this.dragStart.pr,
      this.dragStart.pc,
      this.dragEnd.pr,
      this.dragEnd.pc,
    );
  }

  private draw(): void {
    const geo = this.geometry;
    const mask = this.mask;
    if (!geo || !mask) return;
    const width = pixelWidth(geo);
    const height = pixelHeight(geo);
    for (let pr = 0; pr < height; pr++) {
      for (let pc = 0; pc < width; pc++) {
        const { row, col } = pixelToCell(geo, pr, pc);
        const kept = mask[cellToFlat(geo, row, col)] === 1;
        this.ctx.fillStyle = kept ? COLORS.kept : COLORS.pruned;
        this.ctx.fillRect(pc * CELL, pr * CELL, CELL - 1, CELL - 1);
      }
    }
    if (geo.kind === "conv2d") {
      this.ctx.strokeStyle = COLORS.blockLine;
      const kw = geo.kw ?? 1;
      for (let x = kw; x < width; x += kw) {
        this.ctx.beginPath();
        this.ctx.moveTo(x * CELL - 0.5, 0);
        this.ctx.lineTo(x * CELL - 0.5, height * CELL);
        this.ctx.stroke();
      }
      this.ctx.strokeStyle = COLORS.rowLine;
      for (let y = geo.row_span; y < height; y += geo.row_span) {
        this.ctx.beginPath();
        this.ctx.moveTo(0, y * CELL - 0.5);
        this.ctx.lineTo(width * CELL, y * CELL - 0.5);
        this.ctx.stroke();
      }
    }
    const selection = this.selectionRect();
    if (selection) {
      this.ctx.fillStyle = COLORS.selection;
      this.ctx.fillRect(
        selection.c0 * CELL,
        selection.r0 * CELL,
        (selection.c1 - selection.c0 + 1) * CELL,
        (selection.r1 - selection.r0 + 1) * CELL,
      );
    }
  }
}
