// Browser wiring: ties the API client, session state, and renderers to the
// page.  All display strings come from render.ts / er.ts so this file stays
// thin.

import { ApiClient } from "./api.js";
import { renderErView } from "./er.js";
import { renderTurn } from "./render.js";
import { ConsoleSession, loadStoredSessionId, storeSessionId } from "./session.js";
import type { ConsoleTurn } from "./types.js";

const api = new ApiClient("");
const session = new ConsoleSession();
const turnPages = new Map<number, number>();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function redraw(): void {
  const log = el<HTMLDivElement>("log");
  log.innerHTML = session.turns
    .map((turn, i) => renderTurn(turn, turnPages.get(i) ?? 0))
    .join("\n");
  log.querySelectorAll("article.turn").forEach((article, index) => {
    article.querySelectorAll("nav.pager button").forEach((button) => {
      button.addEventListener("click", () => {
        const delta = button.getAttribute("data-action") === "next" ? 1 : -1;
        turnPages.set(index, (turnPages.get(index) ?? 0) + delta);
        redraw();
      });
    });
    article.querySelectorAll("[data-action=new-session]").forEach((button) => {
      button.addEventListener("click", () => void startSession(true));
    });
  });
  log.scrollTop = log.scrollHeight;
  updateControls();
}

function updateControls(): void {
  const input = el<HTMLInputElement>("question");
  const button = el<HTMLButtonElement>("submit");
  button.disabled = !session.canSubmit(input.value);
  el<HTMLSpanElement>("session-label").textContent =
    session.sessionId ? `session ${session.sessionId}` : "connecting...";
}

async function startSession(force = false): Promise<void> {
  const stored = !force ? loadStoredSessionId() : null;
  if (stored) {
    session.sessionId = stored;
    updateControls();
    return;
  }
  const result = await api.createSession();
  if (result.ok && result.body) {
    session.sessionId = result.body.session_id;
    storeSessionId(session.sessionId);
  }
  updateControls();
}

async function submit(): Promise<void> {
  const input = el<HTMLInputElement>("question");
  const question = input.value.trim();
  if (!session.canSubmit(question) || !session.sessionId) return;
  session.pending = true;
  updateControls();
  const result = await api.query(session.sessionId, question);
  session.pending = false;

  const turn: ConsoleTurn = {
    question,
    ok: result.ok,
    status: result.status,
    parentIndex: session.lastTurnIndex(),
  };
  if (result.ok && result.body) {
    turn.response = result.body;
    input.value = "";
  } else {
    turn.error = result.error;
    if (result.error?.code === "UNKNOWN_SESSION") {
      storeSessionId("");
    }
    // failed turns keep the input so the question can be edited
  }
  session.addTurn(turn);
  redraw();
}

async function refreshSchema(): Promise<void> {
  const result = await api.schema();
  const target = el<HTMLDivElement>("er-view");
  if (result.ok && result.body) {
    target.innerHTML = renderErView(result.body);
  } else {
    target.innerHTML = `<p class="placeholder">schema unavailable</p>`;
  }
}

function wire(): void {
  el<HTMLButtonElement>("submit").addEventListener("click", () => void submit());
  el<HTMLInputElement>("question").addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") void submit();
  });
  el<HTMLInputElement>("question").addEventListener("input", updateControls);
  el<HTMLButtonElement>("refresh-schema").addEventListener(
    "click", () => void refreshSchema());
  void startSession().then(refreshSchema);
}

if (typeof document !== "undefined") {
  wire();
}
