/** Browser entry point: fetch a task, run the annotation loop, submit,
 * repeat. Pure logic lives in the other modules; this file only wires the
 * DOM. */

import { ApiClient, ApiError, SubmitRetryQueue } from "./client.js";
import { DEFAULT_CLASS_COLORS, draw } from "./render.js";
import { UiSession } from "./session.js";
import { bindVisibility } from "./timer.js";
import type { TaskDescriptor } from "./types.js";
import { Viewport } from "./viewport.js";

const WORKER_KEY = "blockforge:worker_id";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function loadImage(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`failed to load ${url}`));
    img.src = url;
  });
}

async function getWorkerId(client: ApiClient): Promise<string> {
  const saved = localStorage.getItem(WORKER_KEY);
  if (saved) return saved;
  const workerId = await client.registerWorker();
  localStorage.setItem(WORKER_KEY, workerId);
  return workerId;
}

class App {
  private readonly client = new ApiClient("");
  private readonly queue = new SubmitRetryQueue(this.client);
  private readonly canvas = el<HTMLCanvasElement>("canvas");
  private readonly ctx = this.canvas.getContext("2d")!;
  private readonly statusLine = el<HTMLDivElement>("status");
  private readonly submitButton = el<HTMLButtonElement>("submit");
  private readonly classBar = el<HTMLDivElement>("classes");
  private viewport = new Viewport();
  private session: UiSession | null = null;
  private image: HTMLImageElement | null = null;
  private unbindVisibility: (() => void) | null = null;
  private dragging = false;
  private dragMoved = 0;
  private last = { x: 0, y: 0 };

  async run(): Promise<void> {
    this.bindInput();
    const workerId = await getWorkerId(this.client);
    for (;;) {
      const task = await this.client.nextTask(workerId);
      if (!task) {
        this.status("no open tasks — thanks for helping!");
        return;
      }
      await this.annotate(workerId, task);
    }
  }

  private async annotate(workerId: string, task: TaskDescriptor): Promise<void> {
    this.session = new UiSession(workerId, task, () => performance.now() / 1000, localStorage);
    this.unbindVisibility?.();
    this.unbindVisibility = bindVisibility(this.session.timer, document);
    this.image = null;
    this.renderClassBar(task);
    this.viewport = new Viewport();
    if (task.block_rect) {
      this.viewport.fitToRect(task.block_rect, this.canvas.width, this.canvas.height, 0.2);
    }
    try {
      this.image = await loadImage(task.image_url);
    } catch {
      this.status("image failed to load — retrying");
      await new Promise((r) => setTimeout(r, 1000));
      return;
    }
    this.redraw();

    await new Promise<void>((resolve) => {
      const tick = setInterval(() => {
        this.updateSubmitState();
        this.redraw();
      }, 250);
      this.submitButton.onclick = async () => {
        const session = this.session!;
        if (!session.canSubmit() || this.queue.busy) return;
        try {
          const v = await this.queue.send(session.buildPayload());
          if (v.verdict === "accepted") {
            this.status(`accepted — paid $${v.payout ? v.payout.total.toFixed(4) : "0"}`);
            session.finish(true);
          } else {
            // The rejected task respawned server-side under a new id; the
            // drafts stay keyed to this block and reload with the respawn.
            this.status(`rejected (${v.reason ?? "unknown"}) — drafts kept for revision`);
            session.finish(false);
          }
          clearInterval(tick);
          resolve();
        } catch (err) {
          if (err instanceof ApiError) {
            this.status(`error ${err.status}: ${err.detail}`);
            if (err.status === 409) {
              clearInterval(tick);
              resolve();
            }
          } else {
            this.status("network trouble — will keep retrying");
          }
        }
      };
    });
  }

  private bindInput(): void {
    this.canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      const rect = this.canvas.getBoundingClientRect();
      const pt = { x: e.clientX - rect.left, y: e.clientY - rect.top };
      this.viewport.zoomAt(pt, e.deltaY < 0 ? 1.2 : 1 / 1.2);
      this.redraw();
    });
    this.canvas.addEventListener("mousedown", (e) => {
      this.dragging = true;
      this.dragMoved = 0;
      this.last = { x: e.clientX, y: e.clientY };
    });
    window.addEventListener("mousemove", (e) => {
      if (!this.dragging) return;
      const dx = e.clientX - this.last.x;
      const dy = e.clientY - this.last.y;
      this.dragMoved += Math.abs(dx) + Math.abs(dy);
      this.last = { x: e.clientX, y: e.clientY };
      this.viewport.pan(dx, dy);
      this.redraw();
    });
    window.addEventListener("mouseup", (e) => {
      if (!this.dragging) return;
      this.dragging = false;
      if (this.dragMoved > 4 || !this.session) return; // drag, not a click
      const rect = this.canvas.getBoundingClientRect();
      const pt = { x: e.clientX - rect.left, y: e.clientY - rect.top };
      const result = this.session.drafts.handleClick(pt, this.viewport);
      if (result.kind === "rejected") this.status(result.message);
      if (result.kind === "closed") this.status("pick a class for the polygon");
      this.redraw();
    });
    window.addEventListener("keydown", (e) => {
      if (e.key === "Escape" && this.session) {
        this.session.drafts.abandonOpen();
        this.redraw();
      }
    });
  }

  private renderClassBar(task: TaskDescriptor): void {
    this.classBar.innerHTML = "";
    task.palette.forEach((cls) => {
      const btn = document.createElement("button");
      btn.textContent = cls.name;
      btn.style.borderColor = DEFAULT_CLASS_COLORS[cls.id % DEFAULT_CLASS_COLORS.length]!;
      btn.onclick = () => {
        const drafts = this.session?.drafts;
        if (drafts?.awaitingClass) {
          drafts.assignClass(cls.id);
          this.redraw();
        }
      };
      this.classBar.appendChild(btn);
    });
  }

  private updateSubmitState(): void {
    const session = this.session;
    if (!session) return;
    const blocked = session.blockedReason();
    this.submitButton.disabled = blocked !== null || this.queue.busy;
    if (blocked) this.status(blocked);
  }

  private redraw(): void {
    if (!this.session) return;
    draw(this.ctx, {
      image: this.image,
      task: this.session.task,
      viewport: this.viewport,
      drafts: this.session.drafts,
      classColors: DEFAULT_CLASS_COLORS,
    });
  }

  private status(text: string): void {
    this.statusLine.textContent = text;
  }
}

new App().run().catch((err) => {
  document.body.textContent = `fatal: ${err}`;
});
