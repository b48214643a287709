/** Canvas rendering: the full image with the area outside the task block
 * dimmed (context stays visible), a high-contrast highlight outline, and
 * the drafted polygons in image space. */

import type { Rect, TaskDescriptor } from "./types.js";
import type { Viewport } from "./viewport.js";
import type { PolygonDrafts } from "./drafts.js";

export interface Scene {
  image: CanvasImageSource | null;
  task: TaskDescriptor;
  viewport: Viewport;
  drafts: PolygonDrafts;
  classColors: string[];
}

export function draw(ctx: CanvasRenderingContext2D, scene: Scene): void {
  const { viewport, task } = scene;
  const canvas = ctx.canvas;
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.fillStyle = "#1c1c1e";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  ctx.setTransform(viewport.scale, 0, 0, viewport.scale, viewport.offsetX, viewport.offsetY);
  ctx.imageSmoothingEnabled = viewport.scale < 4;
  if (scene.image) {
    ctx.drawImage(scene.image, 0, 0);
  }

  if (task.block_rect) {
    dimOutside(ctx, task.block_rect, task.image_width, task.image_height);
  }
  const highlight = task.highlight_rect ?? task.block_rect;
  if (highlight) {
    ctx.lineWidth = 2 / viewport.scale;
    ctx.strokeStyle = "#00e5ff";
    ctx.strokeRect(highlight.x, highlight.y, highlight.width, highlight.height);
  }

  drawPolygons(ctx, scene);
}

function dimOutside(ctx: CanvasRenderingContext2D, block: Rect, w: number, h: number): void {
  ctx.save();
  ctx.beginPath();
  ctx.rect(0, 0, w, h);
  ctx.rect(block.x, block.y, block.width, block.height);
  ctx.clip("evenodd");
  ctx.fillStyle = "rgba(0, 0, 0, 0.55)";
  ctx.fillRect(0, 0, w, h);
  ctx.restore();
}

function drawPolygons(ctx: CanvasRenderingContext2D, scene: Scene): void {
  const { viewport, drafts, classColors } = scene;
  ctx.lineWidth = 1.5 / viewport.scale;

  for (const poly of drafts.polygons) {
    const color = classColors[poly.classId % classColors.length] ?? "#ffffff";
    ctx.strokeStyle = color;
    ctx.fillStyle = color + "44";
    ctx.beginPath();
    poly.vertices.forEach((v, i) => (i === 0 ? ctx.moveTo(v.x, v.y) : ctx.lineTo(v.x, v.y)));
    ctx.closePath();
    ctx.fill();
    ctx.stroke();
  }

  const live = drafts.awaitingClass ? drafts.pendingVertices : drafts.openVertices;
  if (live.length > 0) {
    ctx.strokeStyle = "#ffffff";
    ctx.beginPath();
    live.forEach((v, i) => (i === 0 ? ctx.moveTo(v.x, v.y) : ctx.lineTo(v.x, v.y)));
    if (drafts.awaitingClass) ctx.closePath();
    ctx.stroke();
    const r = 3 / viewport.scale;
    for (const v of live) {
      ctx.beginPath();
      ctx.arc(v.x, v.y, r, 0, Math.PI * 2);
      ctx.fillStyle = "#ffffff";
      ctx.fill();
    }
  }
}

export const DEFAULT_CLASS_COLORS = [
  "#e6194b",
  "#3cb44b",
  "#ffe119",
  "#4363d8",
  "#f58231",
  "#911eb4",
  "#46f0f0",
  "#f032e6",
  "#bcf60c",
  "#fabebe",
];
