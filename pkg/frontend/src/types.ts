/**
 * types.ts - JSON shapes of the session service, mirrored field by field.
 *
 * The UI is a pure projection of these responses; nothing here is
 * client-invented state.
 */

export type Phase = "SEEDING" | "TRAINING" | "SCORING" | "AWAITING_LABELS" | "DONE";

export interface Budget {
  train_cohort_size: number;
  initially_labeled: number;
  queried_total: number;
  distinct_labeled: number;
  savings_fraction: number;
}

export interface RoundRecord {
  round: number;
  labeled_count: number;
  val_auc: number | null;
  test_auc: number | null;
  savings: number;
}

export interface SessionStatus {
  session_id: string;
  phase: Phase;
  round: number;
  strategy: "uncertainty" | "random";
  oracle: "human" | "simulated";
  rounds: number;
  pending_count: number;
  class_count: number;
  budget: Budget;
  latest: RoundRecord | null;
}

export interface ImagePayload {
  kind: "image";
  data: string; // base64 of raw row-major grayscale bytes
  rows: number;
  cols: number;
}

export interface FeaturePayload {
  kind: "features";
  data: number[];
}

export interface QueryItem {
  sample_id: number;
  payload: ImagePayload | FeaturePayload;
  score: number;
  entropy_sum: number;
  kl_sum: number;
  rank: number;
  class_count: number;
  class_names: string[];
}

export interface QueueResponse {
  phase: Phase;
  items: QueryItem[];
}

export interface MetricsResponse {
  rounds: RoundRecord[];
  budget: Budget;
}

export interface LabelAnswer {
  sample_id: number;
  label: number;
}
