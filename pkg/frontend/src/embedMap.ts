/** 2D embedding map: class centroids plus the live edited embedding,
 * projected onto the top-2 principal directions of the centroids. */

import { centroidProjection, fitToScreen, projectPoint, toScreen } from "./projection";
import type { Projection, ScreenMap } from "./projection";

const CLASS_COLORS = ["#7aa2f7", "#9ece6a", "#e0af68", "#f7768e", "#bb9af7", "#7dcfff"];

export class EmbedMap {
  private projection: Projection | null = null;
  private screen: ScreenMap | null = null;
  private centroids: number[][] = [];
  private names: string[] = [];

  constructor(private canvas: HTMLCanvasElement) {}

  setCentroids(centroids: number[][], names: string[]): void {
    this.centroids = centroids;
    this.names = names;
    this.projection = centroidProjection(centroids);
    this.screen = fitToScreen(this.projection, centroids, this.canvas.width, this.canvas.height);
  }

  /** Pixel position of an embedding under the current projection. */
  pixelFor(embedding: number[]): [number, number] | null {
    if (!this.projection || !this.screen) return null;
    return toScreen(this.screen, projectPoint(this.projection, embedding));
  }

  draw(edited: number[] | null, baseLabel: string | null): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.projection || !this.screen) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#14161f";
    ctx.fillRect(0, 0, width, height);

    this.centroids.forEach((c, i) => {
      const [x, y] = this.pixelFor(c)!;
      ctx.fillStyle = CLASS_COLORS[i % CLASS_COLORS.length];
      ctx.beginPath();
      ctx.arc(x, y, this.names[i] === baseLabel ? 9 : 6, 0, Math.PI * 2);
      ctx.fill();
      ctx.fillStyle = "#c8cad4";
      ctx.font = "12px sans-serif";
      ctx.fillText(this.names[i], x + 12, y + 4);
    });

    if (edited) {
      const [x, y] = this.pixelFor(edited)!;
      ctx.strokeStyle = "#ffffff";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(x, y, 7, 0, Math.PI * 2);
      ctx.stroke();
      ctx.beginPath();
      ctx.moveTo(x - 11, y);
      ctx.lineTo(x + 11, y);
      ctx.moveTo(x, y - 11);
      ctx.lineTo(x, y + 11);
      ctx.stroke();
    }
  }
}
