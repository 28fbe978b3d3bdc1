/** Embedding-map math: project class centroids and the current edited
 * embedding onto the top-2 principal directions of the centroids. Pure
 * functions so the geometry is unit-testable without a DOM. */

export interface Projection {
  mean: number[];
  axes: [number[], number[]];
}

function subtract(a: number[], b: number[]): number[] {
  return a.map((x, i) => x - b[i]);
}

function dot(a: number[], b: number[]): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i] * b[i];
  return s;
}

function scale(a: number[], s: number): number[] {
  return a.map((x) => x * s);
}

function norm(a: number[]): number {
  return Math.sqrt(dot(a, a));
}

/** Top eigenvector of a symmetric matrix by power iteration. */
function powerIteration(mat: number[][], iters = 200, seedAxis = 0): number[] {
  const d = mat.length;
  let v: number[] = new Array(d).fill(0).map((_, i) => (i === seedAxis ? 1 : 1e-3));
  for (let it = 0; it < iters; it++) {
    const next = new Array(d).fill(0);
    for (let i = 0; i < d; i++) {
      for (let j = 0; j < d; j++) next[i] += mat[i][j] * v[j];
    }
    const n = norm(next);
    if (n < 1e-300) return v;
    v = scale(next, 1 / n);
  }
  return v;
}

/** Principal directions of the centroid cloud (covariance eigenvectors,
 * second one found after deflation). */
export function centroidProjection(centroids: number[][]): Projection {
  const k = centroids.length;
  const d = centroids[0].length;
  const mean = new Array(d).fill(0);
  for (const c of centroids) for (let i = 0; i < d; i++) mean[i] += c[i] / k;
  const centered = centroids.map((c) => subtract(c, mean));

  const cov: number[][] = Array.from({ length: d }, () => new Array(d).fill(0));
  for (const row of centered) {
    for (let i = 0; i < d; i++) {
      for (let j = 0; j < d; j++) cov[i][j] += row[i] * row[j];
    }
  }

  const v1 = powerIteration(cov, 300, 0);
  const lambda1 = dot(
    v1,
    cov.map((row) => dot(row, v1)),
  );
  const deflated = cov.map((row, i) => row.map((x, j) => x - lambda1 * v1[i] * v1[j]));
  let v2 = powerIteration(deflated, 300, 1);
  v2 = subtract(v2, scale(v1, dot(v2, v1)));
  const n2 = norm(v2);
  if (n2 > 1e-12) v2 = scale(v2, 1 / n2);
  return { mean, axes: [v1, v2] };
}

export function projectPoint(p: Projection, embedding: number[]): [number, number] {
  const centered = subtract(embedding, p.mean);
  return [dot(centered, p.axes[0]), dot(centered, p.axes[1])];
}

export interface ScreenMap {
  scale: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

/** Fit the centroid extent into a width x height box with padding. */
export function fitToScreen(
  p: Projection,
  centroids: number[][],
  width: number,
  height: number,
  padding = 40,
): ScreenMap {
  let extent = 1e-9;
  for (const c of centroids) {
    const [x, y] = projectPoint(p, c);
    extent = Math.max(extent, Math.abs(x), Math.abs(y));
  }
  const scale = (Math.min(width, height) / 2 - padding) / (extent * 1.6);
  return { scale, cx: width / 2, cy: height / 2, width, height };
}

export function toScreen(map: ScreenMap, xy: [number, number]): [number, number] {
  return [map.cx + xy[0] * map.scale, map.cy - xy[1] * map.scale];
}

/** Max distance (px) of intermediate points from the line through the first
 * and last point; 0 for a perfectly straight slider path. */
export function collinearityError(pointsPx: [number, number][]): number {
  if (pointsPx.length < 3) return 0;
  const [x0, y0] = pointsPx[0];
  const [x1, y1] = pointsPx[pointsPx.length - 1];
  const dx = x1 - x0;
  const dy = y1 - y0;
  const len = Math.hypot(dx, dy);
  if (len < 1e-9) {
    return Math.max(
      ...pointsPx.map(([x, y]) => Math.hypot(x - x0, y - y0)),
    );
  }
  let worst = 0;
  for (const [x, y] of pointsPx.slice(1, -1)) {
    const dist = Math.abs(dy * (x - x0) - dx * (y - y0)) / len;
    worst = Math.max(worst, dist);
  }
  return worst;
}
