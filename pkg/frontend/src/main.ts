/** Application shell: wires the API client to the panels. */

import { ApiClient, ApiError } from "./api";
import { MaskCanvas } from "./maskCanvas";
import { decodeMaskView, type GridRect } from "./maskGrid";
import * as timeline from "./timeline";
import { channelTiles, layerBoxes, stepCard, validateSettings } from "./viewmodels";
import type { MaskEdit, ModelInfo } from "./types";

const api = new ApiClient();

interface AppState {
  sessionId: string | null;
  model: ModelInfo | null;
  timeline: timeline.TimelineState;
  layerIndex: number;
  sampleIndex: number;
  brush: "prune" | "restore";
}

const state: AppState = {
  sessionId: null,
  model: null,
  timeline: timeline.emptyTimeline(),
  layerIndex: 0,
  sampleIndex: 0,
  brush: "prune",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const maskCanvas = new MaskCanvas(el<HTMLCanvasElement>("mask-canvas"));

function setStatus(message: string, isError = false): void {
  const node = el<HTMLElement>("status");
  node.textContent = message;
  node.classList.toggle("error", isError);
}

async function mutate(run: () => Promise<void>): Promise<void> {
  if (state.timeline.pending) {
    setStatus("a change is already in flight - wait for it to finish", true);
    return;
  }
  state.timeline = timeline.mutationStarted(state.timeline);
  try {
    await run();
    setStatus("");
  } catch (err) {
    state.timeline = timeline.mutationFailed(state.timeline);
    if (err instanceof ApiError && err.status === 409) {
      setStatus("the session is busy - retry in a moment", true);
    } else {
      setStatus(err instanceof Error ? err.message : String(err), true);
    }
  }
  await refreshViews();
}

async function createSession(): Promise<void> {
  const model = el<HTMLSelectElement>("model-select").value;
  const dataset = el<HTMLSelectElement>("dataset-select").value;
  const created = await api.createSession(model, dataset);
  state.sessionId = created.session_id;
  const models = await api.listModels();
  state.model = models.find((m) => m.name === model) ?? null;
  state.layerIndex = state.model?.weighted_layers?.[0] ?? 0;
  state.timeline = timeline.fromListing(await api.listSteps(created.session_id));
  await refreshViews();
}

async function runPrune(): Promise<void> {
  const algorithm = el<HTMLSelectElement>("algo-select").value;
  const ratio = Number(el<HTMLInputElement>("ratio-input").value);
  const errors = validateSettings(algorithm, ratio);
  if (errors.length > 0) {
    setStatus(errors.join("; "), true);
    return;
  }
  await mutate(async () => {
    const result = await api.prune(state.sessionId!, {
      algorithm,
      global_ratio: ratio,
    });
    state.timeline = timeline.stepAdded(state.timeline, result.step);
  });
}

async function submitRects(rects: GridRect[]): Promise<void> {
  const kind = state.brush === "prune" ? "prune_rect" : "restore_rect";
  const edits: MaskEdit[] = rects.map((r) => ({
    layer_index: state.layerIndex,
    kind,
    payload: [r.row0, r.col0, r.row1, r.col1],
  }));
  await mutate(async () => {
    const result = await api.applyEdits(state.sessionId!, edits);
    state.timeline = timeline.stepAdded(state.timeline, result.step);
  });
}

maskCanvas.onRectSelected = (rects) => {
  if (state.sessionId) void submitRects(rects);
};

async function refreshViews(): Promise<void> {
  if (!state.sessionId) return;
  renderTimeline();
  renderOverview();
  await Promise.all([renderMask(), renderFeatureMaps()]);
}

function renderTimeline(): void {
  const list = el<HTMLElement>("timeline");
  list.textContent = "";
  for (const step of state.timeline.steps) {
    const card = stepCard(step);
    const node = document.createElement("div");
    node.className = "step-card";
    node.classList.toggle("current", step.step_id === state.timeline.currentId);
    const title = document.createElement("div");
    title.className = "step-title";
    title.textContent = `#${card.stepId} ${card.label}`;
    const stats = document.createElement("div");
    stats.className = "step-stats";
    stats.textContent =
      `acc ${card.accuracy.toFixed(4)} · loss ${card.meanLoss.toFixed(4)}` +
      ` · pruned ${(card.globalRatio * 100).toFixed(1)}%`;
    node.append(title, stats);
    node.addEventListener("click", () => {
      void mutate(async () => {
        const result = await api.revert(state.sessionId!, step.step_id);
        state.timeline = timeline.reverted(state.timeline, result.current_id);
      });
    });
    if (step.step_id !== 0) {
      const remove = document.createElement("button");
      remove.className = "remove-step";
      remove.textContent = "x";
      remove.title = "remove this step and its descendants";
      remove.addEventListener("click", (e) => {
        e.stopPropagation();
        void mutate(async () => {
          const result = await api.removeStep(state.sessionId!, step.step_id);
          state.timeline = timeline.stepsRemoved(
            state.timeline,
            result.removed,
            result.current_id,
          );
        });
      });
      node.append(remove);
    }
    list.append(node);
  }
}

function renderOverview(): void {
  const host = el<HTMLElement>("overview");
  host.textContent = "";
  const step = timeline.currentStep(state.timeline);
  if (!step || !state.model) return;
  for (const box of layerBoxes(state.model, step.report)) {
    const node = document.createElement("div");
    node.className = "layer-box";
    node.classList.toggle("selected", box.layerIndex === state.layerIndex);
    node.style.height = `${Math.max(4, Math.round(box.remaining * 60))}px`;
    node.title = `${box.kind} (layer ${box.layerIndex}), ${(box.remaining * 100).toFixed(1)}% remaining`;
    node.textContent = box.kind;
    if (state.model.weighted_layers?.includes(box.layerIndex)) {
      node.classList.add("weighted");
      node.addEventListener("click", () => {
        state.layerIndex = box.layerIndex;
        void refreshViews();
      });
    }
    host.append(node);
  }
}

async function renderMask(): Promise<void> {
  const view = await api.mask(state.sessionId!, state.layerIndex);
  maskCanvas.setMask(view.geometry, decodeMaskView(view));
  el<HTMLElement>("mask-summary").textContent =
    `layer ${view.layer_index}: ${view.pruned} / ${view.total} pruned`;
}

async function renderFeatureMaps(): Promise<void> {
  const host = el<HTMLElement>("featuremaps");
  host.textContent = "";
  const doc = await api.featureMaps(state.sessionId!, state.sampleIndex, state.layerIndex);
  for (const tile of channelTiles(doc)) {
    const wrap = document.createElement("div");
    wrap.className = "channel-tile";
    wrap.classList.toggle("dead", tile.isDead);
    const canvas = document.createElement("canvas");
    const rows = tile.pixels.length;
    const cols = tile.pixels[0]?.length ?? 0;
    const scale = Math.max(2, Math.floor(48 / Math.max(rows, cols)));
    canvas.width = cols * scale;
    canvas.height = rows * scale;
    const ctx = canvas.getContext("2d")!;
    for (let r = 0; r < rows; r++) {
      for (let c = 0; c < cols; c++) {
        const v = Math.round(tile.pixels[r][c] * 255);
        ctx.fillStyle = `rgb(${v},${v},${v})`;
        ctx.fillRect(c * scale, r * scale, scale, scale);
      }
    }
    const caption = document.createElement("div");
    caption.className = "channel-caption";
    caption.textContent = `ch ${tile.channel} mean ${tile.mean.toFixed(3)}${tile.isDead ? " (dead)" : ""}`;
    canvas.addEventListener("click", () => {
      const kind = tile.isDead ? "restore_channel" : "prune_channel";
      void mutate(async () => {
        const result = await api.applyEdits(state.sessionId!, [
          { layer_index: state.layerIndex, kind, payload: tile.channel },
        ]);
        state.timeline = timeline.stepAdded(state.timeline, result.step);
      });
    });
    wrap.append(canvas, caption);
    host.append(wrap);
  }
}

async function boot(): Promise<void> {
  const [models, datasets] = await Promise.all([api.listModels(), api.listDatasets()]);
  const modelSelect = el<HTMLSelectElement>("model-select");
  for (const m of models.filter((m) => m.status === "ok")) {
    modelSelect.append(new Option(m.name, m.name));
  }
  const datasetSelect = el<HTMLSelectElement>("dataset-select");
  for (const d of datasets.filter((d) => d.status === "ok")) {
    datasetSelect.append(new Option(d.name, d.name));
  }
  el<HTMLButtonElement>("create-session").addEventListener("click", () => {
    void createSession().catch((err) => setStatus(String(err), true));
  });
  el<HTMLButtonElement>("run-prune").addEventListener("click", () => void runPrune());
  el<HTMLSelectElement>("brush-select").addEventListener("change", (e) => {
    state.brush = (e.target as HTMLSelectElement).value as "prune" | "restore";
  });
  el<HTMLInputElement>("sample-input").addEventListener("change", (e) => {
    state.sampleIndex = Number((e.target as HTMLInputElement).value) || 0;
    void refreshViews();
  });
}

void boot();
