/** REST client for the annotation service, plus a retry queue that holds
 * an unsent submission across network failures without touching drafts. */

import type { ApiSubmissionPayload, TaskDescriptor, VerdictResponse } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function readDetail(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: unknown };
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body);
  } catch {
    return res.statusText;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async registerWorker(): Promise<string> {
    const res = await this.fetchImpl(`${this.baseUrl}/workers`, { method: "POST" });
    if (!res.ok) throw new ApiError(res.status, await readDetail(res));
    const body = (await res.json()) as { worker_id: string };
    return body.worker_id;
  }

  async nextTask(workerId: string): Promise<TaskDescriptor | null> {
    const res = await this.fetchImpl(`${this.baseUrl}/tasks/next`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ worker_id: workerId }),
    });
    if (res.status === 204) return null;
    if (!res.ok) throw new ApiError(res.status, await readDetail(res));
    return (await res.json()) as TaskDescriptor;
  }

  async submit(payload: ApiSubmissionPayload): Promise<VerdictResponse> {
    const res = await this.fetchImpl(`${this.baseUrl}/tasks/${payload.task_id}/submission`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!res.ok) throw new ApiError(res.status, await readDetail(res));
    return (await res.json()) as VerdictResponse;
  }
}

/** Retries a submission until the network lets it through. HTTP errors
 * (4xx/5xx) are not retried: the server answered, surface it verbatim. */
export class SubmitRetryQueue {
  private pending: ApiSubmissionPayload | null = null;
  private inFlight = false;

  constructor(
    private readonly client: ApiClient,
    private readonly delayMs = 1500,
    private readonly sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ) {}

  get busy(): boolean {
    return this.inFlight;
  }

  get queued(): ApiSubmissionPayload | null {
    return this.pending;
  }

  /** At most one submission in flight; a second call while busy throws. */
  async send(payload: ApiSubmissionPayload, maxAttempts = 10): Promise<VerdictResponse> {
    if (this.inFlight) {
      throw new Error("a submission is already in flight");
    }
    this.inFlight = true;
    this.pending = payload;
    try {
      for (let attempt = 1; ; attempt++) {
        try {
          const verdict = await this.client.submit(payload);
          this.pending = null;
          return verdict;
        } catch (err) {
          if (err instanceof ApiError) {
            this.pending = null;
            throw err; // server spoke; do not retry
          }
          if (attempt >= maxAttempts) throw err;
          await this.sleep(this.delayMs);
        }
      }
    } finally {
      this.inFlight = false;
    }
  }
}
