/** Shapes of the JSON documents served by the pruning API (see docs/api.md). */

export interface LayerSummary {
  kind: string;
  weight_shape?: number[];
}

export interface ModelInfo {
  name: string;
  status: "ok" | "invalid";
  reason?: string;
  input_shape?: number[];
  num_layers?: number;
  weighted_layers?: number[];
  layers?: LayerSummary[];
}

export interface DatasetInfo {
  name: string;
  status: "ok" | "invalid";
  reason?: string;
  num_samples?: number;
  num_classes?: number;
  class_names?: string[];
  sample_shape?: number[];
}

export interface LayerSparsity {
  layer_index: number;
  pruned: number;
  total: number;
}

export interface Report {
  accuracy: number;
  mean_loss: number;
  global_ratio: number;
  confusion: number[][];
  /** per class: [recall, precision] points */
  pr_curves: number[][][];
  sparsity: LayerSparsity[];
}

export interface Settings {
  algorithm: string;
  global_ratio: number;
  per_layer_ratio?: Record<string, number>;
}

export interface MaskEdit {
  layer_index: number;
  kind:
    | "prune_indices"
    | "restore_indices"
    | "prune_channel"
    | "restore_channel"
    | "prune_rect"
    | "restore_rect";
  payload: number | number[];
}

export interface StepMask {
  layer_index: number;
  shape: number[];
  bits: string;
}

export interface Step {
  step_id: number;
  parent_id: number | null;
  created_at: number;
  settings: Settings | null;
  manual_edits: MaskEdit[];
  report: Report;
  masks: StepMask[];
}

export interface StepListing {
  session_id: string;
  model: string;
  dataset: string;
  current_id: number;
  steps: Step[];
}

export interface MaskGeometry {
  kind: "dense" | "conv2d";
  rows: number;
  cols: number;
  row_span: number;
  in_ch?: number;
  kh?: number;
  kw?: number;
}

export interface MaskView {
  layer_index: number;
  geometry: MaskGeometry;
  pruned: number;
  total: number;
  format: "bits" | "rle";
  bits?: string;
  runs?: [number, number][];
}

export interface ChannelStats {
  channel: number;
  min: number;
  max: number;
  mean: number;
  is_dead: boolean;
}

export interface FeatureMapsDoc {
  layer_index: number;
  sample_index: number;
  variant: "current" | "baseline";
  maps: number[][][];
  stats: ChannelStats[];
}
