/** Active-work timer: counts only while the tab is visible.
 *
 * The clock source is injectable so tests can script it; elapsed time
 * never decreases and never advances while paused.
 */

export type Clock = () => number;

export class ActiveTimer {
  private accumulated = 0;
  private runningSince: number | null = null;

  constructor(private readonly now: Clock) {}

  start(): void {
    if (this.runningSince === null) {
      this.runningSince = this.now();
    }
  }

  pause(): void {
    if (this.runningSince !== null) {
      this.accumulated += Math.max(0, this.now() - this.runningSince);
      this.runningSince = null;
    }
  }

  get running(): boolean {
    return this.runningSince !== null;
  }

  elapsedSeconds(): number {
    const live = this.runningSince !== null ? Math.max(0, this.now() - this.runningSince) : 0;
    return this.accumulated + live;
  }
}

/** Keep a timer in sync with document visibility. Returns an unbind fn. */
export function bindVisibility(timer: ActiveTimer, doc: Document): () => void {
  const onChange = () => {
    if (doc.visibilityState === "hidden") {
      timer.pause();
    } else {
      timer.start();
    }
  };
  doc.addEventListener("visibilitychange", onChange);
  onChange();
  return () => doc.removeEventListener("visibilitychange", onChange);
}
