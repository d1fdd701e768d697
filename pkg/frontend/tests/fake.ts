/**
 * fake.ts - in-memory stand-in for the session service, used by the
 * store tests. Mirrors the real loop: a fixed-size query batch per
 * round, 422/409 on bad submissions, a metrics row appended when the
 * batch empties, and a refilled queue until the round budget runs out.
 */

import { ApiError } from "../src/api.js";
import type { Api } from "../src/api.js";
import type {
  Budget,
  LabelAnswer,
  MetricsResponse,
  Phase,
  QueryItem,
  QueueResponse,
  RoundRecord,
  SessionStatus,
} from "../src/types.js";

export class FakeService implements Api {
  phase: Phase = "AWAITING_LABELS";
  round = 1;
  pending: QueryItem[] = [];
  history: RoundRecord[] = [];
  initiallyLabeled: number;
  queriedTotal = 0;
  statusCalls = 0;
  submitCalls = 0;
  gate: Promise<void> | null = null; // when set, submits wait on it

  constructor(
    readonly cohort = 100,
    readonly batch = 30,
    readonly rounds = 2,
    readonly classCount = 2,
  ) {
    this.initiallyLabeled = batch;
    this.refill();
  }

  private refill(): void {
    const start = this.round * 1000;
    this.pending = Array.from({ length: this.batch }, (_, i) => ({
      sample_id: start + i,
      payload: { kind: "features", data: [i, -i, i / 2] },
      score: 10 - i / this.batch,
      entropy_sum: 1.5,
      kl_sum: 8.5 - i / this.batch,
      rank: i + 1,
      class_count: this.classCount,
      class_names: ["negative", "positive"],
    }));
  }

  private get distinct(): number {
    return this.initiallyLabeled + this.queriedTotal;
  }

  private get budget(): Budget {
    return {
      train_cohort_size: this.cohort,
      initially_labeled: this.initiallyLabeled,
      queried_total: this.queriedTotal,
      distinct_labeled: this.distinct,
      savings_fraction: 1 - this.distinct / this.cohort,
    };
  }

  async status(): Promise<SessionStatus> {
    this.statusCalls += 1;
    return {
      session_id: "fake",
      phase: this.phase,
      round: this.round,
      strategy: "uncertainty",
      oracle: "human",
      rounds: this.rounds,
      pending_count: this.pending.length,
      class_count: this.classCount,
      budget: this.budget,
      latest: this.history.length > 0 ? this.history[this.history.length - 1] : null,
    };
  }

  async queue(): Promise<QueueResponse> {
    return { phase: this.phase, items: this.pending.map((item) => ({ ...item })) };
  }

  async metrics(): Promise<MetricsResponse> {
    return { rounds: this.history.map((r) => ({ ...r })), budget: this.budget };
  }

  async submitLabels(_id: string, answers: LabelAnswer[]): Promise<SessionStatus> {
    this.submitCalls += 1;
    if (this.gate !== null) {
      await this.gate;
    }
    if (this.phase !== "AWAITING_LABELS") {
      throw new ApiError(409, "WRONG_PHASE", `phase is ${this.phase}`);
    }
    for (const answer of answers) {
      if (!this.pending.some((item) => item.sample_id === answer.sample_id)) {
        throw new ApiError(422, "UNEXPECTED_SAMPLE", `${answer.sample_id} not pending`);
      }
      if (answer.label < 0 || answer.label >= this.classCount) {
        throw new ApiError(422, "INVALID_LABEL", `label ${answer.label}`);
      }
    }
    for (const answer of answers) {
      this.pending = this.pending.filter((item) => item.sample_id !== answer.sample_id);
      this.queriedTotal += 1;
    }
    if (this.pending.length === 0) {
      this.history.push({
        round: this.round,
        labeled_count: this.distinct,
        val_auc: 0.5 + this.round / 4,
        test_auc: 0.5 + this.round / 8,
        savings: 1 - this.distinct / this.cohort,
      });
      if (this.round >= this.rounds) {
        this.phase = "DONE";
      } else {
        this.round += 1;
        this.refill();
      }
    }
    return this.status();
  }
}
