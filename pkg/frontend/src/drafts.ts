/** Polygon drafting: clicks append vertices in image coordinates; a click
 * within the snap radius of the first vertex (in screen pixels, so it
 * tracks zoom) closes the polygon, which then needs a class before it
 * counts as complete. Drafts persist to storage so a reload loses nothing.
 */

import type { Point, SubmissionPolygon } from "./types.js";
import { Viewport, screenDistance } from "./viewport.js";

export const SNAP_RADIUS_PX = 6;

export interface CompletedPolygon {
  vertices: Point[];
  classId: number;
}

export type ClickResult =
  | { kind: "added"; vertex: Point }
  | { kind: "closed" } // awaiting class selection
  | { kind: "rejected"; message: string };

export interface DraftStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

interface DraftState {
  open: Point[];
  pending: Point[] | null;
  completed: CompletedPolygon[];
}

export class PolygonDrafts {
  private open: Point[] = [];
  private pending: Point[] | null = null;
  private completed: CompletedPolygon[] = [];

  constructor(
    private readonly storageKey: string | null = null,
    private readonly storage: DraftStorage | null = null,
  ) {
    this.restore();
  }

  handleClick(screen: Point, viewport: Viewport): ClickResult {
    const image = viewport.screenToImage(screen);
    if (this.pending !== null) {
      return { kind: "rejected", message: "pick a class for the closed polygon first" };
    }
    if (this.open.length > 0) {
      const firstOnScreen = viewport.imageToScreen(this.open[0]!);
      if (screenDistance(screen, firstOnScreen) <= SNAP_RADIUS_PX) {
        if (this.open.length < 3) {
          return { kind: "rejected", message: "a polygon needs at least 3 vertices" };
        }
        this.pending = this.open;
        this.open = [];
        this.persist();
        return { kind: "closed" };
      }
    }
    this.open.push(image);
    this.persist();
    return { kind: "added", vertex: image };
  }

  /** Class selection for the polygon that was just closed. */
  assignClass(classId: number): void {
    if (this.pending === null) {
      throw new Error("no closed polygon awaiting a class");
    }
    this.completed.push({ vertices: this.pending, classId });
    this.pending = null;
    this.persist();
  }

  get openVertices(): readonly Point[] {
    return this.open;
  }

  get awaitingClass(): boolean {
    return this.pending !== null;
  }

  get pendingVertices(): readonly Point[] {
    return this.pending ?? [];
  }

  get polygons(): readonly CompletedPolygon[] {
    return this.completed;
  }

  abandonOpen(): void {
    this.open = [];
    this.pending = null;
    this.persist();
  }

  clear(): void {
    this.open = [];
    this.pending = null;
    this.completed = [];
    if (this.storage && this.storageKey) {
      this.storage.removeItem(this.storageKey);
    }
  }

  toSubmissionPolygons(): SubmissionPolygon[] {
    return this.completed.map((p) => ({
      class_id: p.classId,
      vertices: p.vertices.map((v) => [v.x, v.y] as [number, number]),
    }));
  }

  private persist(): void {
    if (!this.storage || !this.storageKey) return;
    const state: DraftState = { open: this.open, pending: this.pending, completed: this.completed };
    this.storage.setItem(this.storageKey, JSON.stringify(state));
  }

  private restore(): void {
    if (!this.storage || !this.storageKey) return;
    const raw = this.storage.getItem(this.storageKey);
    if (!raw) return;
    try {
      const state = JSON.parse(raw) as DraftState;
      this.open = state.open ?? [];
      this.pending = state.pending ?? null;
      this.completed = state.completed ?? [];
    } catch {
      this.storage.removeItem(this.storageKey);
    }
  }
}
