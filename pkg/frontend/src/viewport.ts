/** Zoom/pan transform between image space and screen space.
 *
 * Vertices are always stored in image coordinates, so any sequence of
 * zooms and pans leaves traced geometry untouched; only the rendering
 * transform changes.
 */

import type { Point, Rect } from "./types.js";

const MIN_SCALE = 0.05;
const MAX_SCALE = 64;

export class Viewport {
  scale = 1;
  offsetX = 0;
  offsetY = 0;

  imageToScreen(p: Point): Point {
    return { x: p.x * this.scale + this.offsetX, y: p.y * this.scale + this.offsetY };
  }

  screenToImage(p: Point): Point {
    return { x: (p.x - this.offsetX) / this.scale, y: (p.y - this.offsetY) / this.scale };
  }

  /** Zoom by `factor` keeping the given screen point fixed. */
  zoomAt(screen: Point, factor: number): void {
    const next = Math.min(MAX_SCALE, Math.max(MIN_SCALE, this.scale * factor));
    const anchor = this.screenToImage(screen);
    this.scale = next;
    this.offsetX = screen.x - anchor.x * this.scale;
    this.offsetY = screen.y - anchor.y * this.scale;
  }

  pan(dx: number, dy: number): void {
    this.offsetX += dx;
    this.offsetY += dy;
  }

  /** Center the view on a rectangle with at least `margin` of its size as
   * padding on every side (the initial auto-zoom onto the task block). */
  fitToRect(rect: Rect, canvasWidth: number, canvasHeight: number, margin = 0.2): void {
    const padded = {
      x: rect.x - rect.width * margin,
      y: rect.y - rect.height * margin,
      width: rect.width * (1 + 2 * margin),
      height: rect.height * (1 + 2 * margin),
    };
    const sx = canvasWidth / padded.width;
    const sy = canvasHeight / padded.height;
    this.scale = Math.min(MAX_SCALE, Math.max(MIN_SCALE, Math.min(sx, sy)));
    const cx = padded.x + padded.width / 2;
    const cy = padded.y + padded.height / 2;
    this.offsetX = canvasWidth / 2 - cx * this.scale;
    this.offsetY = canvasHeight / 2 - cy * this.scale;
  }
}

export function screenDistance(a: Point, b: Point): number {
  return Math.hypot(a.x - b.x, a.y - b.y);
}
