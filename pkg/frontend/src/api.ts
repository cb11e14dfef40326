/**
 * Typed client for the session service.
 *
 * The service speaks six endpoints; this module mirrors their payloads
 * one-to-one and turns non-2xx responses into ApiError so callers can
 * branch on the HTTP status (409 means "out of order", 410 "expired").
 */

/** GET /model/info */
export interface ModelInfo {
  n_items: number;
  n_attributes: number;
  n_trees: number;
  d: number;
  /** recommendation list size */
  K: number;
  /** turn budget */
  T: number;
}

export interface QuestionPayload {
  type: "question";
  attribute_id: number;
  label: string;
}

/** one entry of a recommendation list, rank is 1-based */
export interface CardPayload {
  item_id: number;
  rank: number;
  score: number;
}

export interface RecommendationPayload {
  type: "recommendation";
  items: CardPayload[];
  turn: number;
}

export type NextPayload = QuestionPayload | RecommendationPayload;

export type SessionStatus = "active" | "succeeded" | "failed";

export interface AnswerReply {
  ok: boolean;
  turn: number;
}

export interface FeedbackReply {
  ok: boolean;
  status: SessionStatus;
  turn: number;
}

/** GET /sessions/{id}/state */
export interface StateView {
  session_id: string;
  turn: number;
  status: SessionStatus;
  turns_used: number;
  answers: Record<string, boolean>;
  excluded_count: number;
  visited_trees: number[];
  tree_index: number | null;
  pending: "question" | "recommendation" | null;
}

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    // keep the global bound to its own receiver
    this.fetchImpl = fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      payload = null;
    }
    if (!response.ok) {
      const detail =
        payload && typeof payload === "object" && "detail" in payload
          ? String((payload as { detail: unknown }).detail)
          : response.statusText || "request failed";
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }

  modelInfo(): Promise<ModelInfo> {
    return this.request<ModelInfo>("GET", "/model/info");
  }

  async createSession(seed?: number): Promise<string> {
    const body = seed === undefined ? {} : { seed };
    const reply = await this.request<{ session_id: string }>(
      "POST",
      "/sessions",
      body,
    );
    return reply.session_id;
  }

  next(sessionId: string): Promise<NextPayload> {
    return this.request<NextPayload>("GET", `/sessions/${sessionId}/next`);
  }

  answer(sessionId: string, yes: boolean): Promise<AnswerReply> {
    return this.request<AnswerReply>("POST", `/sessions/${sessionId}/answer`, {
      value: yes ? "yes" : "no",
    });
  }

  feedback(
    sessionId: string,
    value: "accept" | "reject",
    itemId?: number,
  ): Promise<FeedbackReply> {
    const body: { value: string; item_id?: number } = { value };
    if (itemId !== undefined) {
      body.item_id = itemId;
    }
    return this.request<FeedbackReply>(
      "POST",
      `/sessions/${sessionId}/feedback`,
      body,
    );
  }

  state(sessionId: string): Promise<StateView> {
    return this.request<StateView>("GET", `/sessions/${sessionId}/state`);
  }
}
