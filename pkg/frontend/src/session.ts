/** One worker working one task: timing, drafts, submit gating.
 *
 * The submit control stays disabled until the active time reaches the
 * task's min_seconds and at least one polygon is complete; the payload is
 * schema-validated before it leaves.
 */

import type { ApiSubmissionPayload, TaskDescriptor } from "./types.js";
import { ActiveTimer, type Clock } from "./timer.js";
import { PolygonDrafts, type DraftStorage } from "./drafts.js";
import { validatePayload } from "./schema.js";

/** Drafts are keyed by image and block, not task id: a rejected task
 * respawns under a fresh id for the same block, and the worker's drafts
 * must survive into that new session for revision. */
export function draftKey(task: TaskDescriptor): string {
  const b = task.block_rect;
  const where = b ? `${b.x},${b.y},${b.width},${b.height}` : "full";
  return `drafts:${task.image_id}:${where}`;
}

export class UiSession {
  readonly timer: ActiveTimer;
  readonly drafts: PolygonDrafts;

  constructor(
    readonly workerId: string,
    readonly task: TaskDescriptor,
    now: Clock,
    storage: DraftStorage | null = null,
  ) {
    this.timer = new ActiveTimer(now);
    this.drafts = new PolygonDrafts(storage ? draftKey(task) : null, storage);
    this.timer.start();
  }

  canSubmit(): boolean {
    return (
      this.timer.elapsedSeconds() >= this.task.min_seconds && this.drafts.polygons.length >= 1
    );
  }

  /** Why submission is blocked, for the UI; null when ready. */
  blockedReason(): string | null {
    if (this.timer.elapsedSeconds() < this.task.min_seconds) {
      const left = this.task.min_seconds - this.timer.elapsedSeconds();
      return `keep annotating: ${Math.ceil(left)}s before submission unlocks`;
    }
    if (this.drafts.polygons.length < 1) {
      return "close at least one polygon before submitting";
    }
    return null;
  }

  buildPayload(): ApiSubmissionPayload {
    if (!this.canSubmit()) {
      throw new Error(this.blockedReason() ?? "cannot submit yet");
    }
    const payload: ApiSubmissionPayload = {
      task_id: this.task.task_id,
      polygons: this.drafts.toSubmissionPolygons(),
      active_seconds: this.timer.elapsedSeconds(),
    };
    return validatePayload(payload);
  }

  /** Accepted work is done; rejected work keeps its drafts for revision. */
  finish(accepted: boolean): void {
    if (accepted) {
      this.drafts.clear();
    }
  }
}
