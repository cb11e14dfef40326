/**
 * DOM view over ChatSession.
 *
 * One ChatApp owns one session view; re-rendering is a full redraw of the
 * transcript and controls (transcripts are short, a turn budget long).
 * Buttons are wired to session methods through a single in-flight promise
 * so a double click cannot race two requests, and tests can await
 * `settled()` after dispatching clicks.
 */

import { ApiClient, FetchLike } from "./api.js";
import {
  ChatSession,
  RecommendationEntry,
  TranscriptEntry,
} from "./session.js";

export interface ChatAppOptions {
  baseUrl: string;
  seed?: number;
  fetchImpl?: FetchLike;
}

export class ChatApp {
  readonly root: HTMLElement;
  readonly session: ChatSession;
  private readonly seed?: number;
  private inflight: Promise<void> = Promise.resolve();

  constructor(root: HTMLElement, options: ChatAppOptions) {
    this.root = root;
    this.seed = options.seed;
    this.session = new ChatSession(
      new ApiClient(options.baseUrl, options.fetchImpl),
    );
    this.buildSkeleton();
    this.render();
  }

  /** Resolves once every queued request has finished. */
  settled(): Promise<void> {
    return this.inflight;
  }

  startNewSession(): Promise<void> {
    return this.enqueue(() => this.session.start(this.seed));
  }

  private enqueue(operation: () => Promise<void>): Promise<void> {
    this.inflight = this.inflight
      .then(operation)
      .catch((error: unknown) => {
        this.session.lastError =
          error instanceof Error ? error.message : String(error);
      })
      .then(() => this.render());
    return this.inflight;
  }

  private buildSkeleton(): void {
    this.root.innerHTML = `
      <div class="chat-header">
        <span class="chat-title">factcrs chat</span>
        <span data-role="turn-badge" class="turn-badge"></span>
        <span data-role="status-badge" class="status-badge"></span>
        <button data-role="new-session" type="button">new session</button>
      </div>
      <div data-role="error" class="error-banner" hidden>
        <span data-role="error-text"></span>
        <button data-role="retry" type="button">retry</button>
      </div>
      <div data-role="transcript" class="transcript"></div>
      <div data-role="controls" class="controls"></div>
    `;
    this.element("new-session").addEventListener("click", () => {
      void this.startNewSession();
    });
    this.element("retry").addEventListener("click", () => {
      void this.retry();
    });
  }

  private retry(): Promise<void> {
    if (this.session.sessionId === null) {
      return this.startNewSession();
    }
    // re-sync: the pending payload is refetched, not replayed
    return this.enqueue(async () => {
      if (!this.session.isTerminal && this.session.pending === null) {
        await this.session.fetchNext();
      }
    });
  }

  private element(role: string): HTMLElement {
    const found = this.root.querySelector<HTMLElement>(
      `[data-role="${role}"]`,
    );
    if (found === null) {
      throw new Error(`missing element: ${role}`);
    }
    return found;
  }

  render(): void {
    const session = this.session;
    const turnBadge = this.element("turn-badge");
    turnBadge.textContent =
      session.status === "idle"
        ? ""
        : `turn ${Math.min(session.turn, session.budget)} / ${session.budget}`;
    const statusBadge = this.element("status-badge");
    statusBadge.textContent = session.status === "idle" ? "" : session.status;
    statusBadge.className = `status-badge status-${session.status}`;

    const banner = this.element("error");
    banner.hidden = session.lastError === null;
    this.element("error-text").textContent = session.lastError ?? "";

    this.renderTranscript();
    this.renderControls();
  }

  private renderTranscript(): void {
    const container = this.element("transcript");
    container.innerHTML = "";
    this.session.transcript.forEach((entry, index) => {
      container.appendChild(this.entryElement(entry, index));
    });
  }

  private entryElement(entry: TranscriptEntry, index: number): HTMLElement {
    const doc = this.root.ownerDocument;
    const bubble = doc.createElement("div");
    switch (entry.kind) {
      case "question":
        bubble.className = "bubble agent";
        bubble.textContent = `do you like ${entry.label}?`;
        break;
      case "answer":
        bubble.className = "bubble user";
        bubble.textContent = entry.yes ? "yes" : "no";
        break;
      case "recommendation":
        bubble.className = "bubble agent cards";
        bubble.appendChild(this.cardList(entry, index));
        break;
      case "feedback":
        bubble.className = "bubble user";
        bubble.textContent = entry.accepted
          ? `accept item ${entry.itemId ?? ""}`.trim()
          : "reject all";
        break;
      case "notice":
        bubble.className = "bubble notice";
        bubble.textContent = entry.text;
        break;
    }
    return bubble;
  }

  private cardList(entry: RecommendationEntry, index: number): HTMLElement {
    const doc = this.root.ownerDocument;
    const list = doc.createElement("ol");
    list.className = "card-list";
    // accept buttons are live only on the list awaiting feedback
    const pendingAtRender = this.session.pending;
    const isPendingList =
      pendingAtRender?.kind === "recommendation" &&
      index === this.session.transcript.length - 1;
    for (const card of entry.cards) {
      const item = doc.createElement("li");
      item.className = "card";
      item.dataset.item = String(card.item_id);
      const label = doc.createElement("span");
      label.textContent = `#${card.rank} item ${card.item_id} (${card.score.toFixed(3)})`;
      item.appendChild(label);
      if (isPendingList && !this.session.isTerminal) {
        const button = doc.createElement("button");
        button.type = "button";
        button.dataset.role = "accept";
        button.dataset.item = String(card.item_id);
        button.textContent = "accept";
        button.addEventListener("click", () => {
          // a stale click (double click, or a click queued behind another
          // request) must not act on a payload it was not rendered for
          void this.enqueue(async () => {
            if (this.session.pending === pendingAtRender) {
              await this.session.accept(card.item_id);
            }
          });
        });
        item.appendChild(button);
      }
      list.appendChild(item);
    }
    return list;
  }

  private renderControls(): void {
    const controls = this.element("controls");
    controls.innerHTML = "";
    const doc = this.root.ownerDocument;
    const pending = this.session.pending;
    if (this.session.isTerminal || pending === null) {
      return;
    }
    const guarded = (action: () => Promise<void>) => async () => {
      // ignore clicks that outlived the payload they were rendered for
      if (this.session.pending === pending) {
        await action();
      }
    };
    if (pending.kind === "question") {
      for (const yes of [true, false]) {
        const button = doc.createElement("button");
        button.type = "button";
        button.dataset.role = yes ? "yes" : "no";
        button.textContent = yes ? "yes" : "no";
        button.addEventListener("click", () => {
          void this.enqueue(guarded(() => this.session.answer(yes)));
        });
        controls.appendChild(button);
      }
    } else {
      const button = doc.createElement("button");
      button.type = "button";
      button.dataset.role = "reject";
      button.textContent = "none of these";
      button.addEventListener("click", () => {
        void this.enqueue(guarded(() => this.session.reject()));
      });
      controls.appendChild(button);
    }
  }
}

export function createChatApp(
  root: HTMLElement,
  options: ChatAppOptions,
): ChatApp {
  return new ChatApp(root, options);
}
