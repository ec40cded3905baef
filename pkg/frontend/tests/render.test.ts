import { describe, expect, it } from "vitest";

import {
  PAGE_SIZE,
  downloadHref,
  escapeHtml,
  pageCount,
  renderBadge,
  renderTable,
} from "../src/render.js";
import { ConsoleSession } from "../src/session.js";
import type { QueryResponse, Row } from "../src/types.js";

function makeRows(n: number): Row[] {
  return Array.from({ length: n }, (_, i) => ({ id: i, name: `row${i}` }));
}

describe("table paging", () => {
  it("single page below the threshold", () => {
    const html = renderTable(["id", "name"], makeRows(100));
    expect(html).not.toContain("pager");
    expect((html.match(/<tr>/g) ?? []).length - 1).toBe(100);
  });

  it("pages at 100 rows client-side", () => {
    const rows = makeRows(250);
    expect(pageCount(rows.length)).toBe(3);
    const first = renderTable(["id", "name"], rows, 0);
    expect(first).toContain("page 1 / 3 (250 rows)");
    expect((first.match(/<tr>/g) ?? []).length - 1).toBe(PAGE_SIZE);
    const last = renderTable(["id", "name"], rows, 2);
    expect(last).toContain("page 3 / 3");
    expect((last.match(/<tr>/g) ?? []).length - 1).toBe(50);
    expect(last).toContain("row249");
  });

  it("clamps out-of-range pages", () => {
    const html = renderTable(["id", "name"], makeRows(150), 99);
    expect(html).toContain("page 2 / 2");
  });

  it("empty result renders a placeholder", () => {
    expect(renderTable(["id"], [])).toContain("No rows.");
  });
});

describe("badges", () => {
  it("green when ok", () => {
    const html = renderBadge({ ok: true, mode: "strict", missing_tables: [],
                               unknown_columns: [], syntax_error: null });
    expect(html).toContain("badge-ok");
  });

  it("red with defects listed", () => {
    const html = renderBadge({ ok: false, mode: "paper",
                               missing_tables: ["users"],
                               unknown_columns: ["ghost"],
                               syntax_error: "boom" });
    expect(html).toContain("badge-fail");
    expect(html).toContain("missing table users");
    expect(html).toContain("unknown column ghost");
    expect(html).toContain("syntax: boom");
  });
});

describe("input guard", () => {
  it("submit disabled without session, text, or while pending", () => {
    const session = new ConsoleSession();
    expect(session.canSubmit("hello")).toBe(false);       // no session yet
    session.sessionId = "s-1";
    expect(session.canSubmit("")).toBe(false);            // empty input
    expect(session.canSubmit("   ")).toBe(false);
    expect(session.canSubmit("hello")).toBe(true);
    session.pending = true;
    expect(session.canSubmit("hello")).toBe(false);       // one in flight
  });
});

describe("download payload", () => {
  it("carries the full unpaged result", () => {
    const response: QueryResponse = {
      query: "SELECT 1", dialect: "sql",
      validation: { ok: true, mode: "strict", missing_tables: [],
                    unknown_columns: [], syntax_error: null },
      columns: ["id"], rows: makeRows(120).map((r) => ({ id: r.id })),
      summary: "s", attempts: 1,
    };
    const href = downloadHref(response);
    const decoded = JSON.parse(
      decodeURIComponent(href.replace("data:application/json;charset=utf-8,", "")));
    expect(decoded.rows.length).toBe(120);
    expect(decoded.columns).toEqual(["id"]);
  });
});

describe("escaping", () => {
  it("neutralizes markup in cells and queries", () => {
    const html = renderTable(["v"], [{ v: "<script>alert(1)</script>" }]);
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
    expect(escapeHtml(`"quotes" & 'apostrophes'`)).toBe(
      "&quot;quotes&quot; &amp; &#39;apostrophes&#39;");
  });
});
