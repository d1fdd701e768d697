/**
 * store.ts - session state container with optimistic labeling.
 *
 * The view state is a projection of three service responses (status,
 * queue, metrics). submitLabel removes the card immediately, then
 * reconciles: a confirmed label triggers a full refresh (the round may
 * have advanced and refilled the queue), a rejected one restores the
 * exact snapshot and records the error. Polling refreshes are skipped
 * while a submit is in flight so the reconciliation cannot be clobbered.
 */

import { ApiError } from "./api.js";
import type { Api } from "./api.js";
import type {
  MetricsResponse,
  QueryItem,
  SessionStatus,
} from "./types.js";

export interface ViewState {
  status: SessionStatus | null;
  items: QueryItem[];
  metrics: MetricsResponse | null;
  error: string | null;
  stale: boolean; // last poll failed; data shown may be out of date
}

type Listener = (state: ViewState) => void;

export class SessionStore {
  private state: ViewState = {
    status: null,
    items: [],
    metrics: null,
    error: null,
    stale: false,
  };
  private inFlight = new Set<number>();
  private listeners: Listener[] = [];

  constructor(
    private readonly api: Api,
    readonly sessionId: string,
  ) {}

  get view(): ViewState {
    return this.state;
  }

  get submitting(): boolean {
    return this.inFlight.size > 0;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  /** Pull all three endpoints and replace the projection wholesale. */
  async refresh(): Promise<void> {
    if (this.inFlight.size > 0) {
      return; // reconcile first; the poll after the submit settles catches up
    }
    try {
      const [status, queue, metrics] = await Promise.all([
        this.api.status(this.sessionId),
        this.api.queue(this.sessionId),
        this.api.metrics(this.sessionId),
      ]);
      this.set({ status, items: queue.items, metrics, error: null, stale: false });
    } catch (err) {
      this.set({ ...this.state, stale: true, error: describe(err) });
    }
  }

  /**
   * Label one card. Returns true when the server accepted the label.
   * A second call for a sample already in flight is ignored.
   */
  async submitLabel(sampleId: number, label: number): Promise<boolean> {
    if (this.inFlight.has(sampleId)) {
      return false;
    }
    const snapshot = this.state;
    const card = snapshot.items.find((item) => item.sample_id === sampleId);
    if (card === undefined) {
      return false;
    }
    this.inFlight.add(sampleId);
    this.set({
      ...snapshot,
      items: snapshot.items.filter((item) => item.sample_id !== sampleId),
      error: null,
    });
    try {
      await this.api.submitLabels(this.sessionId, [{ sample_id: sampleId, label }]);
      this.inFlight.delete(sampleId);
      await this.refresh();
      return true;
    } catch (err) {
      this.inFlight.delete(sampleId);
      this.set({ ...snapshot, error: describe(err), stale: false });
      if (err instanceof ApiError && (err.status === 409 || err.status === 404)) {
        // the session moved on without us (restart, another tab): resync
        await this.refresh();
      }
      return false;
    }
  }

  private set(next: ViewState): void {
    this.state = next;
    for (const listener of this.listeners) {
      listener(next);
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return `${err.code}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}
