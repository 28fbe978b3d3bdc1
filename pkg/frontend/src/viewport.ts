/** WebGL2 indexed-triangle viewer with per-frame vertex buffer updates.
 * Flat shading is derived in the fragment shader from screen-space
 * derivatives, so no normal buffers are needed while scrubbing frames. */

import { flattenFaces, frameSlice } from "./buffers";
import type { GenerationResult } from "./state";

const VERT_SRC = `#version 300 es
layout(location = 0) in vec3 position;
uniform mat4 u_mvp;
uniform mat4 u_model;
out vec3 v_world;
void main() {
  v_world = (u_model * vec4(position, 1.0)).xyz;
  gl_Position = u_mvp * vec4(position, 1.0);
}`;

const FRAG_SRC = `#version 300 es
precision highp float;
in vec3 v_world;
out vec4 color;
const vec3 LIGHT = normalize(vec3(0.35, 0.45, 1.0));
const vec3 BASE = vec3(0.62, 0.72, 0.92);
void main() {
  vec3 n = normalize(cross(dFdx(v_world), dFdy(v_world)));
  float diffuse = clamp(abs(dot(n, LIGHT)), 0.0, 1.0);
  vec3 shaded = BASE * (0.25 + 0.75 * diffuse);
  color = vec4(shaded, 1.0);
}`;

function mat4Multiply(a: Float32Array, b: Float32Array): Float32Array {
  const out = new Float32Array(16);
  for (let c = 0; c < 4; c++) {
    for (let r = 0; r < 4; r++) {
      let s = 0;
      for (let k = 0; k < 4; k++) s += a[k * 4 + r] * b[c * 4 + k];
      out[c * 4 + r] = s;
    }
  }
  return out;
}

function perspective(fovY: number, aspect: number, near: number, far: number): Float32Array {
  const f = 1 / Math.tan(fovY / 2);
  const out = new Float32Array(16);
  out[0] = f / aspect;
  out[5] = f;
  out[10] = (far + near) / (near - far);
  out[11] = -1;
  out[14] = (2 * far * near) / (near - far);
  return out;
}

function orbitModel(yaw: number, pitch: number): Float32Array {
  const cy = Math.cos(yaw);
  const sy = Math.sin(yaw);
  const cp = Math.cos(pitch);
  const sp = Math.sin(pitch);
  // yaw about y then pitch about x, column-major
  return new Float32Array([
    cy, sy * sp, -sy * cp, 0,
    0, cp, sp, 0,
    sy, -cy * sp, cy * cp, 0,
    0, 0, 0, 1,
  ]);
}

function translation(x: number, y: number, z: number): Float32Array {
  const out = new Float32Array(16);
  out[0] = out[5] = out[10] = out[15] = 1;
  out[12] = x;
  out[13] = y;
  out[14] = z;
  return out;
}

export class Viewport {
  private gl: WebGL2RenderingContext;
  private program: WebGLProgram;
  private vbo: WebGLBuffer;
  private ibo: WebGLBuffer;
  private indexCount = 0;
  private vertexCount = 0;
  private mvpLoc: WebGLUniformLocation;
  private modelLoc: WebGLUniformLocation;
  yaw = 0.35;
  pitch = -0.45;
  distance = 160;

  constructor(private canvas: HTMLCanvasElement) {
    const gl = canvas.getContext("webgl2");
    if (!gl) throw new Error("WebGL2 is required");
    this.gl = gl;
    this.program = this.link(VERT_SRC, FRAG_SRC);
    this.vbo = gl.createBuffer()!;
    this.ibo = gl.createBuffer()!;
    this.mvpLoc = gl.getUniformLocation(this.program, "u_mvp")!;
    this.modelLoc = gl.getUniformLocation(this.program, "u_model")!;
    gl.enable(gl.DEPTH_TEST);
    this.attachOrbitControls();
  }

  private link(vs: string, fs: string): WebGLProgram {
    const gl = this.gl;
    const compile = (type: number, src: string) => {
      const shader = gl.createShader(type)!;
      gl.shaderSource(shader, src);
      gl.compileShader(shader);
      if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
        throw new Error(gl.getShaderInfoLog(shader) ?? "shader compile failed");
      }
      return shader;
    };
    const program = gl.createProgram()!;
    gl.attachShader(program, compile(gl.VERTEX_SHADER, vs));
    gl.attachShader(program, compile(gl.FRAGMENT_SHADER, fs));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(gl.getProgramInfoLog(program) ?? "program link failed");
    }
    return program;
  }

  private attachOrbitControls(): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.canvas.addEventListener("pointerdown", (e) => {
      dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
      this.canvas.setPointerCapture(e.pointerId);
    });
    this.canvas.addEventListener("pointermove", (e) => {
      if (!dragging) return;
      this.yaw += (e.clientX - lastX) * 0.01;
      this.pitch = Math.min(1.4, Math.max(-1.4, this.pitch + (e.clientY - lastY) * 0.01));
      lastX = e.clientX;
      lastY = e.clientY;
    });
    this.canvas.addEventListener("pointerup", () => (dragging = false));
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.distance = Math.min(400, Math.max(60, this.distance * (1 + e.deltaY * 0.001)));
    });
  }

  /** Swap in a new animation atomically (geometry + topology together). */
  setResult(result: GenerationResult): void {
    const gl = this.gl;
    this.vertexCount = result.vertexCount;
    const indices = flattenFaces(result.faces);
    this.indexCount = indices.length;
    gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.ibo);
    gl.bufferData(gl.ELEMENT_ARRAY_BUFFER, indices, gl.STATIC_DRAW);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.vbo);
    gl.bufferData(gl.ARRAY_BUFFER, result.vertexCount * 12, gl.DYNAMIC_DRAW);
    this.uploadFrame(result, 0);
  }

  uploadFrame(result: GenerationResult, frame: number): void {
    const gl = this.gl;
    gl.bindBuffer(gl.ARRAY_BUFFER, this.vbo);
    gl.bufferSubData(gl.ARRAY_BUFFER, 0, frameSlice(result.vertices, frame, this.vertexCount));
  }

  clear(): void {
    this.indexCount = 0;
  }

  draw(): void {
    const gl = this.gl;
    const w = this.canvas.clientWidth || this.canvas.width;
    const h = this.canvas.clientHeight || this.canvas.height;
    if (this.canvas.width !== w || this.canvas.height !== h) {
      this.canvas.width = w;
      this.canvas.height = h;
    }
    gl.viewport(0, 0, w, h);
    gl.clearColor(0.08, 0.09, 0.12, 1);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    if (this.indexCount === 0) return;

    const model = orbitModel(this.yaw, this.pitch);
    const view = translation(0, 0, -this.distance);
    const proj = perspective(0.9, w / Math.max(1, h), 1, 2000);
    const mvp = mat4Multiply(proj, mat4Multiply(view, model));

    gl.useProgram(this.program);
    gl.uniformMatrix4fv(this.mvpLoc, false, mvp);
    gl.uniformMatrix4fv(this.modelLoc, false, model);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.vbo);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 0, 0);
    gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.ibo);
    gl.drawElements(gl.TRIANGLES, this.indexCount, gl.UNSIGNED_INT, 0);
  }
}
