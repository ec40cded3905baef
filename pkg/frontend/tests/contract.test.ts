// Contract tests: every documented /query response shape, rendered from
// fixtures recorded against the real server.

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { renderError, renderTurn } from "../src/render.js";
import type { ApiErrorPayload, ConsoleTurn, QueryResponse } from "../src/types.js";

function fixture<T>(name: string): { status: number; body: T } {
  const raw = readFileSync(join(__dirname, "..", "fixtures", name), "utf-8");
  return JSON.parse(raw);
}

function turnFrom(name: string, question: string): ConsoleTurn {
  const { status, body } = fixture<any>(name);
  if (status === 200) {
    return { question, ok: true, status, response: body as QueryResponse };
  }
  return {
    question,
    ok: false,
    status,
    error: (body as ApiErrorPayload).error,
  };
}

describe("recorded /query success", () => {
  const turn = turnFrom("query_success.json",
    "What were the top 5 products by sales last month?");

  it("shows the generated SQL verbatim", () => {
    const html = renderTurn(turn);
    expect(html).toContain("SELECT product, SUM(price) AS sales FROM purchases");
    expect(html).toContain('data-dialect="sql"');
  });

  it("shows a green badge and the row count", () => {
    const html = renderTurn(turn);
    expect(html).toContain("badge-ok");
    const rows = html.match(/<tr>/g) ?? [];
    expect(rows.length - 1).toBe(turn.response!.rows.length); // minus header row
  });

  it("shows the summary and a download link", () => {
    const html = renderTurn(turn);
    expect(html).toContain(turn.response!.summary.split(".")[0]);
    expect(html).toContain("download JSON");
    expect(html).toContain("data:application/json");
  });

  it("reports attempts within the bound", () => {
    expect(turn.response!.attempts).toBeLessThanOrEqual(3);
    expect(renderTurn(turn)).toContain(`attempts: ${turn.response!.attempts}`);
  });
});

describe("recorded follow-up", () => {
  it("marks the turn as linked to its parent", () => {
    const turn = turnFrom("query_followup.json", "and for electronics only?");
    turn.parentIndex = 0;
    const html = renderTurn(turn);
    expect(html).toContain('class="turn follow-up"');
    expect(html).toContain('data-parent="0"');
    expect(html).toContain("category = &#39;electronics&#39;");
  });
});

describe("recorded 422 with a validation report", () => {
  const turn = turnFrom("query_refinement_exhausted.json", "how many purchases");

  it("renders a red badge plus the defect lists", () => {
    const html = renderTurn(turn);
    expect(turn.status).toBe(422);
    expect(html).toContain("REFINEMENT_EXHAUSTED");
    expect(html).toContain("missing table nowhere");
    expect(html).toContain("unknown column nope");
    expect(html).toContain("badge-fail");
  });
});

describe("every documented error shape renders", () => {
  const cases: Array<[string, string, string]> = [
    ["query_not_translatable.json", "NOT_TRANSLATABLE", ""],
    ["query_malformed.json", "MALFORMED_SOURCE", ""],
    ["query_timeout.json", "PLAN_TIMEOUT", "deadline"],
    ["query_busy.json", "SESSION_BUSY", "already in flight"],
    ["query_unknown_session.json", "UNKNOWN_SESSION", "start new session"],
  ];

  for (const [name, code, expectedHint] of cases) {
    it(`renders ${code}`, () => {
      const { status, body } = fixture<ApiErrorPayload>(name);
      const html = renderError(body.error, status);
      expect(html).toContain(code);
      expect(html).toContain(`data-code="${code}"`);
      if (expectedHint) expect(html).toContain(expectedHint);
    });
  }

  it("network failures offer a retry affordance", () => {
    const html = renderError({ code: "NETWORK", message: "fetch failed" }, 0);
    expect(html).toContain('data-action="retry"');
  });
});
