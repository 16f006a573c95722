/** Thin typed client for the pruning API. */

import type {
  DatasetInfo,
  FeatureMapsDoc,
  MaskEdit,
  MaskView,
  ModelInfo,
  Report,
  Settings,
  Step,
  StepListing,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await response.json();
  if (!response.ok) {
    const detail = body?.detail ?? {};
    throw new ApiError(response.status, detail.message ?? response.statusText, detail.field);
  }
  return body as T;
}

export class ApiClient {
  constructor(private base = "") {}

  listModels(): Promise<ModelInfo[]> {
    return request(`${this.base}/api/models`);
  }

  listDatasets(): Promise<DatasetInfo[]> {
    return request(`${this.base}/api/datasets`);
  }

  createSession(model: string, dataset: string): Promise<{ session_id: string; step: Step }> {
    return request(`${this.base}/api/sessions`, {
      method: "POST",
      body: JSON.stringify({ model, dataset }),
    });
  }

  listSteps(sessionId: string): Promise<StepListing> {
    return request(`${this.base}/api/sessions/${sessionId}/steps`);
  }

  prune(sessionId: string, settings: Settings): Promise<{ step: Step }> {
    return request(`${this.base}/api/sessions/${sessionId}/prune`, {
      method: "POST",
      body: JSON.stringify(settings),
    });
  }

  applyEdits(sessionId: string, edits: MaskEdit[]): Promise<{ step: Step }> {
    return request(`${this.base}/api/sessions/${sessionId}/edits`, {
      method: "POST",
      body: JSON.stringify({ edits }),
    });
  }

  revert(sessionId: string, stepId: number): Promise<{ step: Step; current_id: number }> {
    return request(`${this.base}/api/sessions/${sessionId}/revert`, {
      method: "POST",
      body: JSON.stringify({ step_id: stepId }),
    });
  }

  removeStep(sessionId: string, stepId: number): Promise<{ removed: number[]; current_id: number }> {
    return request(`${this.base}/api/sessions/${sessionId}/steps/${stepId}`, {
      method: "DELETE",
    });
  }

  mask(sessionId: string, layerIndex: number, format: "bits" | "rle" = "bits"): Promise<MaskView> {
    return request(
      `${this.base}/api/sessions/${sessionId}/layers/${layerIndex}/mask?format=${format}`,
    );
  }

  metrics(sessionId: string, stepId?: number): Promise<{ step_id: number; report: Report }> {
    const query = stepId === undefined ? "" : `?step=${stepId}`;
    return request(`${this.base}/api/sessions/${sessionId}/metrics${query}`);
  }

  featureMaps(
    sessionId: string,
    sample: number,
    layer: number,
    variant: "current" | "baseline" = "current",
  ): Promise<FeatureMapsDoc> {
    return request(
      `${this.base}/api/sessions/${sessionId}/featuremaps?sample=${sample}&layer=${layer}&variant=${variant}`,
    );
  }
}
