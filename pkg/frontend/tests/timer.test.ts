import { describe, expect, it } from "vitest";

import { ActiveTimer } from "../src/timer.js";
import { UiSession } from "../src/session.js";
import { Viewport } from "../src/viewport.js";
import { MemoryStorage, ScriptedClock, task } from "./helpers.js";

describe("ActiveTimer", () => {
  it("accumulates only while running", () => {
    const clock = new ScriptedClock();
    const timer = new ActiveTimer(clock.now);
    timer.start();
    clock.advance(4);
    expect(timer.elapsedSeconds()).toBe(4);
    timer.pause();
    clock.advance(100);
    expect(timer.elapsedSeconds()).toBe(4);
    timer.start();
    clock.advance(2);
    expect(timer.elapsedSeconds()).toBe(6);
  });

  it("never decreases across arbitrary start/pause scripts", () => {
    const clock = new ScriptedClock();
    const timer = new ActiveTimer(clock.now);
    let previous = 0;
    const script = [1, 0, 3, 2, 0.5, 7, 0.1, 4];
    script.forEach((dt, i) => {
      if (i % 2 === 0) timer.start();
      else timer.pause();
      clock.advance(dt);
      const now = timer.elapsedSeconds();
      expect(now).toBeGreaterThanOrEqual(previous);
      previous = now;
    });
  });

  it("double start and double pause are harmless", () => {
    const clock = new ScriptedClock();
    const timer = new ActiveTimer(clock.now);
    timer.start();
    timer.start();
    clock.advance(5);
    timer.pause();
    timer.pause();
    expect(timer.elapsedSeconds()).toBe(5);
  });
});

describe("submit gating (scripted clock)", () => {
  function closedTriangle(session: UiSession): void {
    const vp = new Viewport();
    session.drafts.handleClick({ x: 20, y: 20 }, vp);
    session.drafts.handleClick({ x: 60, y: 20 }, vp);
    session.drafts.handleClick({ x: 40, y: 60 }, vp);
    expect(session.drafts.handleClick({ x: 20, y: 20 }, vp).kind).toBe("closed");
    session.drafts.assignClass(1);
  }

  it("submit stays disabled before min_seconds even with polygons ready", () => {
    const clock = new ScriptedClock();
    const session = new UiSession("w1", task({ min_seconds: 10 }), clock.now);
    closedTriangle(session);
    for (let t = 0; t < 10; t += 0.5) {
      expect(session.canSubmit()).toBe(false);
      expect(session.blockedReason()).toMatch(/before submission unlocks/);
      expect(() => session.buildPayload()).toThrow();
      clock.advance(0.5);
    }
    expect(session.canSubmit()).toBe(true);
    expect(session.blockedReason()).toBeNull();
  });

  it("hidden-tab time does not unlock submission", () => {
    const clock = new ScriptedClock();
    const session = new UiSession("w1", task({ min_seconds: 10 }), clock.now);
    closedTriangle(session);
    clock.advance(5);
    session.timer.pause(); // tab hidden
    clock.advance(3600);
    session.timer.start(); // visible again
    expect(session.timer.elapsedSeconds()).toBe(5);
    expect(session.canSubmit()).toBe(false);
    clock.advance(5);
    expect(session.canSubmit()).toBe(true);
  });

  it("needs at least one closed polygon", () => {
    const clock = new ScriptedClock();
    const session = new UiSession("w1", task({ min_seconds: 1 }), clock.now);
    clock.advance(30);
    expect(session.canSubmit()).toBe(false);
    expect(session.blockedReason()).toMatch(/close at least one polygon/);
    closedTriangle(session);
    expect(session.canSubmit()).toBe(true);
  });

  it("reported active_seconds matches the scripted clock", () => {
    const clock = new ScriptedClock();
    const session = new UiSession("w1", task({ min_seconds: 10 }), clock.now, new MemoryStorage());
    closedTriangle(session);
    clock.advance(93);
    expect(session.buildPayload().active_seconds).toBe(93);
  });
});
