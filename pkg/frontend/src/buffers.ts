/** Vertex buffer decoding: the service ships T*V*3 float32 little-endian. */

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  // node test environment
  return new Uint8Array(Buffer.from(b64, "base64"));
}

export function decodeVertexBuffer(b64: string, frames: number, vertexCount: number): Float32Array {
  const bytes = base64ToBytes(b64);
  const expected = frames * vertexCount * 3 * 4;
  if (bytes.byteLength !== expected) {
    throw new Error(`vertex buffer holds ${bytes.byteLength} bytes, expected ${expected}`);
  }
  // enforce little-endian regardless of platform
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const floats = new Float32Array(frames * vertexCount * 3);
  for (let i = 0; i < floats.length; i++) floats[i] = view.getFloat32(i * 4, true);
  return floats;
}

export function frameSlice(
  buffer: Float32Array,
  frame: number,
  vertexCount: number,
): Float32Array {
  const stride = vertexCount * 3;
  return buffer.subarray(frame * stride, (frame + 1) * stride);
}

export function buffersEqual(a: Uint8Array, b: Uint8Array): boolean {
  if (a.byteLength !== b.byteLength) return false;
  for (let i = 0; i < a.byteLength; i++) if (a[i] !== b[i]) return false;
  return true;
}

export function flattenFaces(faces: number[][]): Uint32Array {
  const out = new Uint32Array(faces.length * 3);
  for (let i = 0; i < faces.length; i++) {
    out[i * 3] = faces[i][0];
    out[i * 3 + 1] = faces[i][1];
    out[i * 3 + 2] = faces[i][2];
  }
  return out;
}
