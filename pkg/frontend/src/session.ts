// Client-side session state.  The server owns the conversation; the console
// keeps only the session id (persisted across reloads) and the append-only
// list of displayed turns.

import type { ConsoleTurn } from "./types.js";

const STORAGE_KEY = "polyfed.session_id";

export class ConsoleSession {
  sessionId: string | null = null;
  turns: ConsoleTurn[] = [];
  pending = false;

  /** Submission is allowed only with a session, non-empty text, nothing in flight. */
  canSubmit(text: string): boolean {
    return this.sessionId !== null && !this.pending && text.trim().length > 0;
  }

  addTurn(turn: ConsoleTurn): number {
    this.turns.push(turn);
    return this.turns.length - 1;
  }

  lastTurnIndex(): number | undefined {
    return this.turns.length ? this.turns.length - 1 : undefined;
  }
}

export function loadStoredSessionId(storage?: Pick<Storage, "getItem">): string | null {
  const store = storage ?? globalThis.localStorage;
  if (!store) return null;
  try {
    return store.getItem(STORAGE_KEY);
  } catch {
    return null;
  }
}

export function storeSessionId(
  sessionId: string,
  storage?: Pick<Storage, "setItem">,
): void {
  const store = storage ?? globalThis.localStorage;
  if (!store) return;
  try {
    store.setItem(STORAGE_KEY, sessionId);
  } catch {
    /* storage unavailable: session lives for this page only */
  }
}
