import { describe, expect, it } from "vitest";

import { PolygonDrafts, SNAP_RADIUS_PX } from "../src/drafts.js";
import { Viewport } from "../src/viewport.js";
import { MemoryStorage } from "./helpers.js";

describe("PolygonDrafts", () => {
  it("three clicks then a snap-close produce a triangle draft", () => {
    const drafts = new PolygonDrafts();
    const vp = new Viewport();
    expect(drafts.handleClick({ x: 10, y: 10 }, vp).kind).toBe("added");
    expect(drafts.handleClick({ x: 50, y: 10 }, vp).kind).toBe("added");
    expect(drafts.handleClick({ x: 30, y: 40 }, vp).kind).toBe("added");
    const close = drafts.handleClick({ x: 10 + SNAP_RADIUS_PX - 1, y: 10 }, vp);
    expect(close.kind).toBe("closed");
    expect(drafts.awaitingClass).toBe(true);
    drafts.assignClass(2);
    expect(drafts.polygons).toHaveLength(1);
    expect(drafts.polygons[0]!.classId).toBe(2);
    expect(drafts.polygons[0]!.vertices).toHaveLength(3);
  });

  it("closing with fewer than 3 vertices is rejected", () => {
    const drafts = new PolygonDrafts();
    const vp = new Viewport();
    drafts.handleClick({ x: 10, y: 10 }, vp);
    drafts.handleClick({ x: 50, y: 10 }, vp);
    const attempt = drafts.handleClick({ x: 11, y: 10 }, vp);
    expect(attempt.kind).toBe("rejected");
    expect(drafts.openVertices).toHaveLength(2); // drawing continues
  });

  it("snap radius is measured in screen pixels, so it tightens with zoom", () => {
    const drafts = new PolygonDrafts();
    const vp = new Viewport();
    vp.zoomAt({ x: 0, y: 0 }, 4); // 4x zoom
    drafts.handleClick({ x: 40, y: 40 }, vp); // image (10, 10)
    drafts.handleClick({ x: 200, y: 40 }, vp);
    drafts.handleClick({ x: 120, y: 160 }, vp);
    // 5 screen px from the first vertex: closes even though that is only
    // 1.25 image px
    const close = drafts.handleClick({ x: 45, y: 40 }, vp);
    expect(close.kind).toBe("closed");
    drafts.assignClass(0);
    const first = drafts.polygons[0]!.vertices[0]!;
    expect(Math.abs(first.x - 10)).toBeLessThan(1e-9);
    expect(Math.abs(first.y - 10)).toBeLessThan(1e-9);
  });

  it("vertices are stored in image space regardless of viewport state", () => {
    const drafts = new PolygonDrafts();
    const vp = new Viewport();
    vp.zoomAt({ x: 100, y: 100 }, 3);
    vp.pan(-50, 20);
    const screen = { x: 310, y: 140 };
    const image = vp.screenToImage(screen);
    drafts.handleClick(screen, vp);
    const stored = drafts.openVertices[0]!;
    expect(stored.x).toBeCloseTo(image.x, 9);
    expect(stored.y).toBeCloseTo(image.y, 9);
  });

  it("persists drafts through storage and restores on reload", () => {
    const storage = new MemoryStorage();
    const vp = new Viewport();
    const drafts = new PolygonDrafts("drafts:t1", storage);
    drafts.handleClick({ x: 10, y: 10 }, vp);
    drafts.handleClick({ x: 50, y: 10 }, vp);
    drafts.handleClick({ x: 30, y: 40 }, vp);
    drafts.handleClick({ x: 10, y: 10 }, vp);
    drafts.assignClass(1);
    drafts.handleClick({ x: 80, y: 80 }, vp); // an open vertex too

    const reloaded = new PolygonDrafts("drafts:t1", storage);
    expect(reloaded.polygons).toHaveLength(1);
    expect(reloaded.polygons[0]!.classId).toBe(1);
    expect(reloaded.openVertices).toHaveLength(1);
  });

  it("clear wipes storage; abandonOpen keeps completed polygons", () => {
    const storage = new MemoryStorage();
    const vp = new Viewport();
    const drafts = new PolygonDrafts("drafts:t2", storage);
    drafts.handleClick({ x: 10, y: 10 }, vp);
    drafts.handleClick({ x: 50, y: 10 }, vp);
    drafts.handleClick({ x: 30, y: 40 }, vp);
    drafts.handleClick({ x: 10, y: 10 }, vp);
    drafts.assignClass(0);
    drafts.handleClick({ x: 90, y: 90 }, vp);
    drafts.abandonOpen();
    expect(drafts.polygons).toHaveLength(1);
    expect(drafts.openVertices).toHaveLength(0);
    drafts.clear();
    expect(drafts.polygons).toHaveLength(0);
    expect(storage.getItem("drafts:t2")).toBeNull();
  });

  it("clicks are ignored while a polygon awaits its class", () => {
    const drafts = new PolygonDrafts();
    const vp = new Viewport();
    drafts.handleClick({ x: 10, y: 10 }, vp);
    drafts.handleClick({ x: 50, y: 10 }, vp);
    drafts.handleClick({ x: 30, y: 40 }, vp);
    drafts.handleClick({ x: 10, y: 10 }, vp);
    expect(drafts.awaitingClass).toBe(true);
    const result = drafts.handleClick({ x: 200, y: 200 }, vp);
    expect(result.kind).toBe("rejected");
    drafts.assignClass(0);
    expect(drafts.handleClick({ x: 200, y: 200 }, vp).kind).toBe("added");
  });
});
