/**
 * Client-side session state machine.
 *
 * Holds the transcript and the pending action, and only ever offers the
 * controls the last server payload allows: yes/no while a question is
 * pending, accept/reject while a list is pending, nothing once terminal.
 * The turn counter is taken from server replies, never computed locally.
 */

import {
  ApiClient,
  ApiError,
  CardPayload,
  SessionStatus,
} from "./api.js";

export type ChatStatus = "idle" | SessionStatus;

export interface AgentQuestionEntry {
  kind: "question";
  attributeId: number;
  label: string;
  turn: number;
}

export interface UserAnswerEntry {
  kind: "answer";
  yes: boolean;
}

export interface RecommendationEntry {
  kind: "recommendation";
  cards: CardPayload[];
  turn: number;
}

export interface FeedbackEntry {
  kind: "feedback";
  accepted: boolean;
  itemId?: number;
}

export interface NoticeEntry {
  kind: "notice";
  text: string;
}

export type TranscriptEntry =
  | AgentQuestionEntry
  | UserAnswerEntry
  | RecommendationEntry
  | FeedbackEntry
  | NoticeEntry;

export type PendingAction =
  | { kind: "question"; attributeId: number; label: string }
  | { kind: "recommendation"; cards: CardPayload[] }
  | null;

export class ChatSession {
  readonly api: ApiClient;
  sessionId: string | null = null;
  status: ChatStatus = "idle";
  /** current turn as last reported by the server */
  turn = 0;
  /** turn budget T, from /model/info */
  budget = 0;
  /** list size K, from /model/info */
  listSize = 0;
  catalogSize = 0;
  pending: PendingAction = null;
  transcript: TranscriptEntry[] = [];
  /** set when a request failed; cleared by the next successful user action */
  lastError: string | null = null;

  constructor(api: ApiClient) {
    this.api = api;
  }

  get isTerminal(): boolean {
    return this.status === "succeeded" || this.status === "failed";
  }

  /** POST /sessions then fetch the first action. */
  async start(seed?: number): Promise<void> {
    const info = await this.api.modelInfo();
    this.budget = info.T;
    this.listSize = info.K;
    this.catalogSize = info.n_items;
    this.sessionId = await this.api.createSession(seed);
    this.status = "active";
    this.turn = 1;
    this.transcript = [];
    this.pending = null;
    this.lastError = null;
    await this.fetchNext();
  }

  /** Pull the next agent action and append it to the transcript. */
  async fetchNext(): Promise<void> {
    const id = this.requireSession();
    let payload;
    try {
      payload = await this.api.next(id);
    } catch (error) {
      await this.recoverFrom(error);
      return;
    }
    this.lastError = null;
    if (payload.type === "question") {
      this.pending = {
        kind: "question",
        attributeId: payload.attribute_id,
        label: payload.label,
      };
      this.transcript.push({
        kind: "question",
        attributeId: payload.attribute_id,
        label: payload.label,
        turn: this.turn,
      });
    } else {
      this.turn = payload.turn;
      this.pending = { kind: "recommendation", cards: payload.items };
      this.transcript.push({
        kind: "recommendation",
        cards: payload.items,
        turn: payload.turn,
      });
    }
  }

  async answer(yes: boolean): Promise<void> {
    const id = this.requireSession();
    if (this.pending?.kind !== "question") {
      throw new Error("no question is pending");
    }
    let reply;
    try {
      reply = await this.api.answer(id, yes);
    } catch (error) {
      await this.recoverFrom(error);
      return;
    }
    this.lastError = null;
    this.transcript.push({ kind: "answer", yes });
    this.turn = reply.turn;
    this.pending = null;
    await this.fetchNext();
  }

  async accept(itemId?: number): Promise<void> {
    await this.sendFeedback("accept", itemId);
  }

  async reject(): Promise<void> {
    await this.sendFeedback("reject");
  }

  private async sendFeedback(
    value: "accept" | "reject",
    itemId?: number,
  ): Promise<void> {
    const id = this.requireSession();
    if (this.pending?.kind !== "recommendation") {
      throw new Error("no recommendation is pending");
    }
    let reply;
    try {
      reply = await this.api.feedback(id, value, itemId);
    } catch (error) {
      await this.recoverFrom(error);
      return;
    }
    this.lastError = null;
    this.transcript.push({
      kind: "feedback",
      accepted: value === "accept",
      itemId,
    });
    this.turn = reply.turn;
    this.status = reply.status;
    this.pending = null;
    if (reply.status === "active") {
      await this.fetchNext();
    } else {
      this.transcript.push({
        kind: "notice",
        text:
          reply.status === "succeeded"
            ? `item accepted on turn ${reply.turn}`
            : `out of turns after ${this.budget}`,
      });
    }
  }

  /**
   * Re-sync with the server after a failed call. Out-of-order replies
   * (409) and expiry (404/410) carry a human detail string; connection
   * failures keep the session where it was so the caller can retry.
   */
  private async recoverFrom(error: unknown): Promise<void> {
    if (!(error instanceof ApiError)) {
      this.lastError =
        error instanceof Error ? error.message : "connection failed";
      return;
    }
    this.lastError = error.detail;
    if (error.status === 404 || error.status === 410) {
      this.status = "failed";
      this.pending = null;
      this.transcript.push({ kind: "notice", text: "session expired" });
      return;
    }
    if (this.sessionId === null) {
      return;
    }
    const detail = error.detail;
    try {
      const view = await this.api.state(this.sessionId);
      this.turn = view.turn;
      this.status = view.status;
      if (view.pending === null && view.status === "active") {
        await this.fetchNext();
        // resync succeeded, but the out-of-order notice stays visible
        // until the user acts again
        this.lastError = detail;
      } else if (view.status !== "active") {
        this.pending = null;
      }
    } catch {
      // state fetch failed too; leave the last error in place
    }
  }

  private requireSession(): string {
    if (this.sessionId === null) {
      throw new Error("session has not been started");
    }
    return this.sessionId;
  }
}
