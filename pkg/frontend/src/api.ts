/** Typed client for the engine's HTTP API. */

export interface ShapeJson {
  id: string;
  label: string;
  shape_type: "rectangle";
  points: [[number, number], [number, number]];
  source: "human" | "model";
  confidence?: number;
  [extra: string]: unknown;
}

export interface DocJson {
  format_version: string;
  imagePath: string;
  imageWidth: number;
  imageHeight: number;
  shapes: ShapeJson[];
  [extra: string]: unknown;
}

export interface AnnotationsResponse {
  doc: DocJson;
  token: string;
}

export type EditJson =
  | { op: "add"; shape: ShapeJson }
  | { op: "move" | "resize"; shape_id: string; points: [[number, number], [number, number]] }
  | { op: "relabel"; shape_id: string; label: string }
  | { op: "delete"; shape_id: string };

export interface ModelVersionJson {
  version_id: number;
  weights_uri: string;
  status: "training" | "ready" | "failed";
  parent_version: number | null;
  snapshot_id: string | null;
  epochs: number | null;
  diagnostics: string | null;
  eval_report_path: string | null;
}

export interface ProjectJson {
  project_id: string;
  image_root: string;
  settings: Record<string, unknown>;
  class_map: string[];
  models: ModelVersionJson[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: Record<string, unknown>,
  ) {
    super(String(body["detail"] ?? `HTTP ${status}`));
  }
}

/** 409 on save: carries the latest server document for reload-and-merge. */
export class ConflictError extends ApiError {
  doc: DocJson;
  token: string;

  constructor(status: number, body: Record<string, unknown>) {
    super(status, body);
    this.doc = body["doc"] as DocJson;
    this.token = body["token"] as string;
  }
}

export class ApiClient {
  constructor(public baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = (await resp.json().catch(() => ({}))) as Record<string, unknown>;
    if (!resp.ok) {
      if (resp.status === 409 && payload["doc"] !== undefined) {
        throw new ConflictError(resp.status, payload);
      }
      throw new ApiError(resp.status, payload);
    }
    return payload as T;
  }

  createProject(imageRoot: string, projectId?: string, settings?: Record<string, unknown>) {
    return this.request<ProjectJson>("POST", "/projects", {
      image_root: imageRoot,
      project_id: projectId,
      settings,
    });
  }

  getProject(id: string) {
    return this.request<ProjectJson>("GET", `/projects/${id}`);
  }

  async listImages(id: string): Promise<string[]> {
    const body = await this.request<{ images: string[] }>("GET", `/projects/${id}/images`);
    return body.images;
  }

  imageUrl(id: string, image: string): string {
    return `${this.baseUrl}/projects/${id}/images/${image}/file`;
  }

  getAnnotations(id: string, image: string) {
    return this.request<AnnotationsResponse>("GET", `/projects/${id}/images/${image}/annotations`);
  }

  putAnnotations(id: string, image: string, token: string, edits: EditJson[]) {
    return this.request<AnnotationsResponse>("PUT", `/projects/${id}/images/${image}/annotations`, {
      token,
      edits,
    });
  }

  detect(id: string, images?: string[], versionId?: number) {
    return this.request<{ version_id: number; counts: Record<string, number>; errors: Record<string, string> }>(
      "POST",
      `/projects/${id}/detect`,
      { images, version_id: versionId },
    );
  }

  train(id: string, epochs = 1, baseVersion?: number) {
    return this.request<ModelVersionJson>("POST", `/projects/${id}/train`, {
      epochs,
      base_version: baseVersion,
    });
  }

  importModel(id: string, weightsUri: string) {
    return this.request<ModelVersionJson>("POST", `/projects/${id}/models`, {
      weights_uri: weightsUri,
    });
  }

  async models(id: string): Promise<ModelVersionJson[]> {
    const body = await this.request<{ models: ModelVersionJson[] }>("GET", `/projects/${id}/models`);
    return body.models;
  }

  evaluation(id: string, version: number) {
    return this.request<Record<string, unknown>>("GET", `/projects/${id}/models/${version}/evaluation`);
  }

  exportDataset(id: string) {
    return this.request<{ snapshot_id: string }>("GET", `/projects/${id}/export`);
  }
}
