/**
 * api.ts - thin typed client for the session service.
 *
 * Every non-2xx response carries {code, message, detail}; that body is
 * surfaced as an ApiError so the store can distinguish a rejected label
 * (422/409) from a connection problem.
 */

import type {
  LabelAnswer,
  MetricsResponse,
  QueueResponse,
  SessionStatus,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface Api {
  status(sessionId: string): Promise<SessionStatus>;
  queue(sessionId: string, limit?: number): Promise<QueueResponse>;
  metrics(sessionId: string): Promise<MetricsResponse>;
  submitLabels(sessionId: string, answers: LabelAnswer[]): Promise<SessionStatus>;
}

async function parse<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let code = "HTTP_ERROR";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (body && typeof body.code === "string") {
      code = body.code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(response.status, code, message);
}

export class HttpApi implements Api {
  constructor(private readonly base: string = "") {}

  status(sessionId: string): Promise<SessionStatus> {
    return this.get(`/api/sessions/${sessionId}`);
  }

  queue(sessionId: string, limit?: number): Promise<QueueResponse> {
    const suffix = limit === undefined ? "" : `?limit=${limit}`;
    return this.get(`/api/sessions/${sessionId}/queue${suffix}`);
  }

  metrics(sessionId: string): Promise<MetricsResponse> {
    return this.get(`/api/sessions/${sessionId}/metrics`);
  }

  async submitLabels(sessionId: string, answers: LabelAnswer[]): Promise<SessionStatus> {
    const response = await fetch(`${this.base}/api/sessions/${sessionId}/labels`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(answers),
    });
    return parse(response);
  }

  private async get<T>(path: string): Promise<T> {
    return parse(await fetch(this.base + path));
  }
}
