// Pure renderers: every function maps server JSON to an HTML string, so the
// whole display layer is testable without a DOM.

import type { ApiErrorPayload, ConsoleTurn, QueryResponse, Row, ValidationReport } from "./types.js";

export const PAGE_SIZE = 100;

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function formatValue(value: unknown): string {
  if (value === null || value === undefined) return "null";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") return String(value);
  return String(value);
}

export function renderBadge(report: ValidationReport): string {
  if (report.ok) {
    return `<span class="badge badge-ok">valid (${escapeHtml(report.mode)})</span>`;
  }
  const defects: string[] = [];
  for (const table of report.missing_tables) {
    defects.push(`missing table ${escapeHtml(table)}`);
  }
  for (const column of report.unknown_columns) {
    defects.push(`unknown column ${escapeHtml(column)}`);
  }
  if (report.syntax_error) {
    defects.push(`syntax: ${escapeHtml(report.syntax_error)}`);
  }
  const list = defects.map((d) => `<li>${d}</li>`).join("");
  return `<span class="badge badge-fail">invalid (${escapeHtml(report.mode)})</span>` +
    `<ul class="defects">${list}</ul>`;
}

export function pageCount(totalRows: number): number {
  return Math.max(1, Math.ceil(totalRows / PAGE_SIZE));
}

export function renderTable(columns: string[], rows: Row[], page = 0): string {
  if (rows.length === 0) {
    return `<p class="empty">No rows.</p>`;
  }
  const pages = pageCount(rows.length);
  const current = Math.min(Math.max(page, 0), pages - 1);
  const start = current * PAGE_SIZE;
  const visible = rows.slice(start, start + PAGE_SIZE);
  const head = columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  const body = visible
    .map((row) =>
      `<tr>${columns.map((c) => `<td>${escapeHtml(formatValue(row[c]))}</td>`).join("")}</tr>`)
    .join("");
  const pager = pages > 1
    ? `<nav class="pager" data-pages="${pages}" data-page="${current}">` +
      `<button data-action="prev"${current === 0 ? " disabled" : ""}>prev</button>` +
      `<span>page ${current + 1} / ${pages} (${rows.length} rows)</span>` +
      `<button data-action="next"${current === pages - 1 ? " disabled" : ""}>next</button>` +
      `</nav>`
    : "";
  return `<table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>${pager}`;
}

/** data: URL carrying the complete (unpaged) result for download. */
export function downloadHref(response: QueryResponse): string {
  const payload = JSON.stringify(
    { columns: response.columns, rows: response.rows },
    null,
    2,
  );
  return "data:application/json;charset=utf-8," + encodeURIComponent(payload);
}

export function renderError(error: ApiErrorPayload["error"], status: number): string {
  const parts = [
    `<div class="error" data-code="${escapeHtml(error.code)}">`,
    `<span class="badge badge-fail">${escapeHtml(error.code)} (${status})</span>`,
    `<p>${escapeHtml(error.message)}</p>`,
  ];
  if (error.code === "REFINEMENT_EXHAUSTED" && error.detail) {
    parts.push(renderBadge(error.detail as ValidationReport));
  }
  if (error.code === "PLAN_TIMEOUT" || error.code === "TRANSLATOR_TIMEOUT") {
    parts.push(`<p class="hint">The query ran past the server deadline; try again.</p>`);
  }
  if (error.code === "UNKNOWN_SESSION") {
    parts.push(`<button data-action="new-session">start new session</button>`);
  }
  if (error.code === "SESSION_BUSY") {
    parts.push(`<p class="hint">A request is already in flight for this session.</p>`);
  }
  if (error.code === "NETWORK") {
    parts.push(`<button data-action="retry">retry</button>`);
  }
  parts.push("</div>");
  return parts.join("");
}

export function renderTurn(turn: ConsoleTurn, page = 0): string {
  const pieces = [
    `<article class="turn${turn.parentIndex !== undefined ? " follow-up" : ""}"` +
      (turn.parentIndex !== undefined
        ? ` data-parent="${turn.parentIndex}"`
        : "") +
      `>`,
    `<p class="question">${escapeHtml(turn.question)}</p>`,
  ];
  if (turn.response) {
    const r = turn.response;
    pieces.push(
      `<pre class="query" data-dialect="${escapeHtml(r.dialect)}">${escapeHtml(r.query)}</pre>`,
      renderBadge(r.validation),
      `<p class="attempts">attempts: ${r.attempts}</p>`,
      renderTable(r.columns, r.rows, page),
      `<p class="summary">${escapeHtml(r.summary)}</p>`,
      `<a class="download" download="result.json" href="${downloadHref(r)}">download JSON</a>`,
    );
  } else if (turn.error) {
    pieces.push(renderError(turn.error, turn.status));
  }
  pieces.push("</article>");
  return pieces.join("\n");
}
