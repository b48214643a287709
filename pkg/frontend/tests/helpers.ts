import type { TaskDescriptor } from "../src/types.js";

/** Deterministic PRNG (mulberry32) for scripted tests. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export class ScriptedClock {
  t = 0;
  now = (): number => this.t;
  advance(dt: number): void {
    this.t += dt;
  }
}

export class MemoryStorage {
  private map = new Map<string, string>();
  getItem(key: string): string | null {
    return this.map.get(key) ?? null;
  }
  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
  removeItem(key: string): void {
    this.map.delete(key);
  }
}

export function task(overrides: Partial<TaskDescriptor> = {}): TaskDescriptor {
  return {
    task_id: "t000001",
    image_id: "demo:img0",
    image_url: "/images/demo:img0",
    image_width: 2048,
    image_height: 1024,
    kind: "block",
    block_rect: { x: 0, y: 0, width: 204, height: 102 },
    highlight_rect: { x: 1, y: 1, width: 202, height: 100 },
    palette: [
      { id: 0, name: "road" },
      { id: 1, name: "car" },
      { id: 2, name: "sky" },
    ],
    min_seconds: 10,
    ...overrides,
  };
}
