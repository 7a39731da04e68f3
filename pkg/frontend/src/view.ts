/** World (image pixel) <-> screen transform: uniform zoom plus pan. */

import type { Box, Point } from "./geometry.js";

export const MIN_ZOOM = 0.05;
export const MAX_ZOOM = 40;

export class ViewTransform {
  scale = 1;
  offsetX = 0;
  offsetY = 0;

  worldToScreen(p: Point): Point {
    return { x: p.x * this.scale + this.offsetX, y: p.y * this.scale + this.offsetY };
  }

  screenToWorld(p: Point): Point {
    return { x: (p.x - this.offsetX) / this.scale, y: (p.y - this.offsetY) / this.scale };
  }

  worldBoxToScreen(b: Box): Box {
    const a = this.worldToScreen({ x: b.x1, y: b.y1 });
    const c = this.worldToScreen({ x: b.x2, y: b.y2 });
    return { x1: a.x, y1: a.y, x2: c.x, y2: c.y };
  }

  screenBoxToWorld(b: Box): Box {
    const a = this.screenToWorld({ x: b.x1, y: b.y1 });
    const c = this.screenToWorld({ x: b.x2, y: b.y2 });
    return { x1: a.x, y1: a.y, x2: c.x, y2: c.y };
  }

  /** Zoom by `factor` keeping the given screen point visually fixed. */
  zoomAt(anchor: Point, factor: number): void {
    const next = Math.min(Math.max(this.scale * factor, MIN_ZOOM), MAX_ZOOM);
    const applied = next / this.scale;
    this.offsetX = anchor.x - (anchor.x - this.offsetX) * applied;
    this.offsetY = anchor.y - (anchor.y - this.offsetY) * applied;
    this.scale = next;
  }

  panBy(dx: number, dy: number): void {
    this.offsetX += dx;
    this.offsetY += dy;
  }

  /** Center the image in the canvas at the largest whole-image zoom. */
  fitTo(imageW: number, imageH: number, canvasW: number, canvasH: number): void {
    const scale = Math.min(canvasW / imageW, canvasH / imageH);
    this.scale = Math.min(Math.max(scale, MIN_ZOOM), MAX_ZOOM);
    this.offsetX = (canvasW - imageW * this.scale) / 2;
    this.offsetY = (canvasH - imageH * this.scale) / 2;
  }
}
