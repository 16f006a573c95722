/**
 * Pure view-model builders. Every number these produce is copied verbatim
 * from an API document (or is pure layout geometry) — the UI never computes
 * its own metrics. Display-only transforms (normalization, box heights)
 * map API values into [0, 1] and are tested for traceability.
 */

import type { FeatureMapsDoc, ModelInfo, Report, Step } from "./types";

export interface StepCard {
  stepId: number;
  parentId: number | null;
  label: string;
  accuracy: number;
  meanLoss: number;
  globalRatio: number;
  sparsity: { layerIndex: number; pruned: number; total: number }[];
}

export function stepCard(step: Step): StepCard {
  let label = "baseline";
  if (step.settings) {
    label = `${step.settings.algorithm} @ ${step.settings.global_ratio}`;
  } else if (step.manual_edits.length > 0) {
    label = `manual (${step.manual_edits.length} edits)`;
  }
  return {
    stepId: step.step_id,
    parentId: step.parent_id,
    label,
    accuracy: step.report.accuracy,
    meanLoss: step.report.mean_loss,
    globalRatio: step.report.global_ratio,
    sparsity: step.report.sparsity.map((s) => ({
      layerIndex: s.layer_index,
      pruned: s.pruned,
      total: s.total,
    })),
  };
}

export interface LayerBox {
  layerIndex: number;
  kind: string;
  /** fraction of weights still unpruned, in [0, 1]; 1 for weight-free layers */
  remaining: number;
}

/** Proportional overview of the network: box height ~ remaining weights. */
export function layerBoxes(model: ModelInfo, report: Report): LayerBox[] {
  const byLayer = new Map(report.sparsity.map((s) => [s.layer_index, s]));
  return (model.layers ?? []).map((layer, index) => {
    const sparsity = byLayer.get(index);
    const remaining =
      sparsity === undefined ? 1 : (sparsity.total - sparsity.pruned) / sparsity.total;
    return { layerIndex: index, kind: layer.kind, remaining };
  });
}

/** Min-max normalize one feature map into [0, 1]; constant maps become 0. */
export function normalizeMap(map: number[][]): number[][] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of map) {
    for (const v of row) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  const span = hi - lo;
  if (span === 0) return map.map((row) => row.map(() => 0));
  return map.map((row) => row.map((v) => (v - lo) / span));
}

export interface ChannelTile {
  channel: number;
  pixels: number[][];
  min: number;
  max: number;
  mean: number;
  isDead: boolean;
}

export function channelTiles(doc: FeatureMapsDoc): ChannelTile[] {
  return doc.maps.map((map, channel) => {
    const stats = doc.stats[channel];
    return {
      channel,
      pixels: normalizeMap(map),
      min: stats.min,
      max: stats.max,
      mean: stats.mean,
      isDead: stats.is_dead,
    };
  });
}

/** Validate prune settings before they are sent; returns error messages. */
export function validateSettings(
  algorithm: string,
  globalRatio: number,
  perLayer: Record<string, number> = {},
): string[] {
  const errors: string[] = [];
  const algorithms = ["map", "lap", "lap_forward", "lap_backward"];
  if (!algorithms.includes(algorithm)) {
    errors.push(`unknown algorithm "${algorithm}"`);
  }
  if (!Number.isFinite(globalRatio) || globalRatio < 0 || globalRatio > 1) {
    errors.push("global ratio must be in [0, 1]");
  }
  for (const [layer, ratio] of Object.entries(perLayer)) {
    if (!Number.isFinite(ratio) || ratio < 0 || ratio > 1) {
      errors.push(`ratio for layer ${layer} must be in [0, 1]`);
    }
  }
  return errors;
}
