import { describe, expect, it } from "vitest";

import {
  base64ToBytes,
  buffersEqual,
  decodeVertexBuffer,
  flattenFaces,
  frameSlice,
} from "../src/buffers";

function f32ToB64(values: number[]): string {
  const arr = new Float32Array(values);
  const view = new DataView(new ArrayBuffer(arr.length * 4));
  arr.forEach((v, i) => view.setFloat32(i * 4, v, true)); // force LE
  return Buffer.from(new Uint8Array(view.buffer)).toString("base64");
}

describe("decodeVertexBuffer", () => {
  it("decodes little-endian float32 triplets", () => {
    const values = [0, 1, 2, 3.5, -4.25, 5, 6, 7, 8, 9, 10, 11];
    const out = decodeVertexBuffer(f32ToB64(values), 2, 2);
    expect(Array.from(out)).toEqual(values);
  });

  it("rejects a buffer of the wrong length", () => {
    expect(() => decodeVertexBuffer(f32ToB64([1, 2, 3]), 2, 2)).toThrow(/expected 48/);
  });

  it("round-trips through base64 bytes exactly", () => {
    const values = Array.from({ length: 36 }, (_, i) => Math.fround(Math.sin(i) * 10));
    const b64 = f32ToB64(values);
    const decoded = decodeVertexBuffer(b64, 3, 4);
    expect(buffersEqual(base64ToBytes(b64), new Uint8Array(decoded.buffer))).toBe(true);
  });
});

describe("frameSlice", () => {
  it("selects one frame worth of coordinates", () => {
    const buf = new Float32Array(Array.from({ length: 18 }, (_, i) => i));
    expect(Array.from(frameSlice(buf, 1, 3))).toEqual([9, 10, 11, 12, 13, 14, 15, 16, 17]);
    expect(frameSlice(buf, 0, 3).length).toBe(9);
  });
});

describe("flattenFaces", () => {
  it("flattens triangle index lists", () => {
    expect(Array.from(flattenFaces([[0, 1, 2], [2, 3, 0]]))).toEqual([0, 1, 2, 2, 3, 0]);
  });
});

describe("buffersEqual", () => {
  it("detects differences", () => {
    expect(buffersEqual(new Uint8Array([1, 2]), new Uint8Array([1, 2]))).toBe(true);
    expect(buffersEqual(new Uint8Array([1, 2]), new Uint8Array([1, 3]))).toBe(false);
    expect(buffersEqual(new Uint8Array([1]), new Uint8Array([1, 2]))).toBe(false);
  });
});
