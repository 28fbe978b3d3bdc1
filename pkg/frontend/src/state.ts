/** Studio state and the request controller. A monotonically increasing token
 * guards against out-of-order responses: only the newest generation result is
 * ever applied. */

import type { ApiClient, GenerateResponse, ModelInfo } from "./api";
import { decodeVertexBuffer } from "./buffers";

export const SLIDER_MIN = -3;
export const SLIDER_MAX = 3;
export const SLIDER_STEP = 0.05;

export interface GenerationResult {
  frames: number;
  fps: number;
  vertexCount: number;
  vertices: Float32Array;
  rawBytesB64: string;
  faces: number[][];
  editedEmbedding: number[];
}

export interface StudioState {
  classNames: string[];
  centroids: number[][];
  baseLabel: string | null;
  baseEmbedding: number[] | null;
  sliders: number[];
  seed: number;
  frames: number;
  editedEmbedding: number[] | null;
  result: GenerationResult | null;
  frameIndex: number;
  playing: boolean;
  busy: boolean;
  error: string | null;
}

export interface SliderEvent {
  k: number;
  alpha: number;
  generate: boolean;
}

function clampSlider(alpha: number): number {
  return Math.min(SLIDER_MAX, Math.max(SLIDER_MIN, alpha));
}

export class StudioController {
  state: StudioState = {
    classNames: [],
    centroids: [],
    baseLabel: null,
    baseEmbedding: null,
    sliders: [],
    seed: 0,
    frames: 32,
    editedEmbedding: null,
    result: null,
    frameIndex: 0,
    playing: false,
    busy: false,
    error: null,
  };

  private generateToken = 0;
  private editToken = 0;
  onChange: (() => void) | null = null;

  constructor(private api: ApiClient) {}

  private notify(): void {
    this.onChange?.();
  }

  async loadDictionary(): Promise<void> {
    const [dict, info] = await Promise.all([this.api.getDictionary(), this.api.getModelInfo()]);
    this.applyModelInfo(dict.class_names, info);
  }

  applyModelInfo(classNames: string[], info: ModelInfo): void {
    this.state.classNames = classNames;
    this.state.centroids = info.class_centroids;
    this.state.sliders = classNames.map(() => 0);
    this.state.frames = info.default_frames;
    const base = this.state.baseLabel;
    if ((base === null || !classNames.includes(base)) && classNames.length > 0) {
      this.selectBase(classNames[0]);
    }
    this.notify();
  }

  selectBase(label: string): void {
    const idx = this.state.classNames.indexOf(label);
    if (idx < 0) throw new Error(`unknown class ${label}`);
    this.state.baseLabel = label;
    this.state.baseEmbedding = this.state.centroids[idx].slice();
    this.state.editedEmbedding = null;
    this.notify();
  }

  setSlider(k: number, alpha: number): void {
    if (k < 0 || k >= this.state.sliders.length) throw new Error(`bad slider index ${k}`);
    this.state.sliders[k] = clampSlider(alpha);
    this.notify();
  }

  resetSliders(): void {
    this.state.sliders = this.state.sliders.map(() => 0);
    this.notify();
  }

  currentEdits(): { k: number; alpha: number }[] {
    return this.state.sliders
      .map((alpha, k) => ({ k, alpha }))
      .filter((e) => e.alpha !== 0);
  }

  /** Refresh the edited embedding shown on the map; editing math stays
   * server-side. Stale responses are dropped. */
  async refreshEdited(): Promise<number[] | null> {
    if (!this.state.baseEmbedding) return null;
    const token = ++this.editToken;
    const res = await this.api.postEdit(this.state.baseEmbedding, this.currentEdits());
    if (token !== this.editToken) return null;
    this.state.editedEmbedding = res.embedding;
    this.notify();
    return res.embedding;
  }

  /** Run a generation; only the newest in-flight request may swap the
   * playback buffer (atomic replace, no partial frames). */
  async generate(): Promise<GenerationResult | null> {
    if (!this.state.baseLabel && !this.state.baseEmbedding) {
      throw new Error("no base selected");
    }
    const token = ++this.generateToken;
    this.state.busy = true;
    this.state.error = null;
    this.notify();
    try {
      const res = await this.api.postGenerate({
        label: this.state.baseLabel ?? undefined,
        edits: this.currentEdits(),
        frames: this.state.frames,
        seed: this.state.seed,
        deterministic: true,
      });
      if (token !== this.generateToken) return null; // superseded
      const result = toResult(res);
      this.state.result = result;
      this.state.editedEmbedding = res.manifest.edited_embedding;
      this.state.frameIndex = 0;
      this.state.playing = true;
      return result;
    } catch (err) {
      // keep the last good buffers; only surface the error
      if (token === this.generateToken) {
        this.state.error = err instanceof Error ? err.message : String(err);
      }
      throw err;
    } finally {
      if (token === this.generateToken) {
        this.state.busy = false;
      }
      this.notify();
    }
  }

  /** Replay a recorded slider script; with a fixed seed the produced buffers
   * are identical across replays. Returns the generated raw buffers. */
  async replayScript(script: SliderEvent[]): Promise<string[]> {
    const outputs: string[] = [];
    this.resetSliders();
    for (const event of script) {
      this.setSlider(event.k, event.alpha);
      if (event.generate) {
        const result = await this.generate();
        if (result) outputs.push(result.rawBytesB64);
      }
    }
    return outputs;
  }

  seek(frame: number): void {
    if (!this.state.result) return;
    this.state.frameIndex = Math.min(Math.max(0, frame), this.state.result.frames - 1);
    this.notify();
  }
}

export function toResult(res: GenerateResponse): GenerationResult {
  const { frames, fps, vertex_count } = res.manifest;
  return {
    frames,
    fps,
    vertexCount: vertex_count,
    vertices: decodeVertexBuffer(res.vertices_b64, frames, vertex_count),
    rawBytesB64: res.vertices_b64,
    faces: res.faces,
    editedEmbedding: res.manifest.edited_embedding,
  };
}
