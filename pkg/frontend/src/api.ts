/** Typed client for the editing service. All editing math happens server-side;
 * the UI only displays what the API returns. */

export interface DictionaryDoc {
  format: string;
  version: number;
  d: number;
  K: number;
  class_names: string[];
  class_directions: number[][];
  w_norms: number[];
}

export interface ModelInfo {
  V: number;
  F: number;
  K: number;
  class_names: string[];
  class_centroids: number[][];
  d_emotion: number;
  default_frames: number;
  fps: number;
}

export interface EditSpec {
  k: number;
  alpha: number;
}

export interface GenerateRequest {
  label?: string;
  embedding?: number[];
  edits: EditSpec[];
  frames: number;
  seed: number;
  deterministic: boolean;
}

export interface GenerateResponse {
  manifest: {
    frames: number;
    fps: number;
    vertex_count: number;
    seed: number;
    deterministic: boolean;
    label: string | null;
    edited_embedding: number[];
  };
  vertices_b64: string;
  faces: number[][];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, init);
  const body = await res.json().catch(() => null);
  if (!res.ok) {
    const err = body?.error ?? { code: "http_error", message: res.statusText };
    throw new ApiError(res.status, err.code, err.message);
  }
  return body as T;
}

export class ApiClient {
  constructor(private base: string = "") {}

  getDictionary(): Promise<DictionaryDoc> {
    return request(this.base, "/api/dictionary");
  }

  getModelInfo(): Promise<ModelInfo> {
    return request(this.base, "/api/model/info");
  }

  postEdit(embedding: number[], edits: EditSpec[]): Promise<{ embedding: number[] }> {
    return request(this.base, "/api/edit", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ embedding, edits }),
    });
  }

  postGenerate(req: GenerateRequest): Promise<GenerateResponse> {
    return request(this.base, "/api/generate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }
}
