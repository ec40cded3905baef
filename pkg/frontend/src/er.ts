// ER diagram rendering: entities as boxes on a grid, relationships as
// labeled arrows.  Pure SVG-string output.

import type { SchemaPayload } from "./types.js";
import { escapeHtml } from "./render.js";

const BOX_WIDTH = 160;
const BOX_HEIGHT = 48;
const GAP_X = 80;
const GAP_Y = 70;
const COLUMNS = 3;

interface Placed {
  name: string;
  x: number;
  y: number;
}

export function layoutEntities(entities: string[]): Placed[] {
  return entities.map((name, i) => ({
    name,
    x: 20 + (i % COLUMNS) * (BOX_WIDTH + GAP_X),
    y: 20 + Math.floor(i / COLUMNS) * (BOX_HEIGHT + GAP_Y),
  }));
}

function center(p: Placed): [number, number] {
  return [p.x + BOX_WIDTH / 2, p.y + BOX_HEIGHT / 2];
}

export function renderErView(schema: SchemaPayload): string {
  const entities = schema.er.entities;
  if (entities.length === 0) {
    return `<p class="placeholder">no schema yet</p>`;
  }
  const placed = layoutEntities(entities);
  const byName = new Map(placed.map((p) => [p.name, p]));
  const rows = Math.ceil(entities.length / COLUMNS);
  const width = 40 + Math.min(entities.length, COLUMNS) * (BOX_WIDTH + GAP_X);
  const height = 40 + rows * (BOX_HEIGHT + GAP_Y);

  const parts = [
    `<svg class="er" viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg">`,
    `<defs><marker id="arrow" markerWidth="8" markerHeight="8" refX="7" refY="4" orient="auto">` +
      `<path d="M0,0 L8,4 L0,8 z"/></marker></defs>`,
  ];
  for (const rel of schema.er.relationships) {
    const from = byName.get(rel.from);
    const to = byName.get(rel.to);
    if (!from || !to) continue;
    const [x1, y1] = center(from);
    const [x2, y2] = center(to);
    const midX = (x1 + x2) / 2;
    const midY = (y1 + y2) / 2 - 6;
    parts.push(
      `<line class="rel" x1="${x1}" y1="${y1}" x2="${x2}" y2="${y2}" marker-end="url(#arrow)"/>`,
      `<text class="rel-label" x="${midX}" y="${midY}" text-anchor="middle">` +
        `${escapeHtml(rel.via)} (${escapeHtml(rel.cardinality)})</text>`,
    );
  }
  for (const p of placed) {
    parts.push(
      `<g class="entity" data-name="${escapeHtml(p.name)}">` +
        `<rect x="${p.x}" y="${p.y}" width="${BOX_WIDTH}" height="${BOX_HEIGHT}" rx="6"/>` +
        `<text x="${p.x + BOX_WIDTH / 2}" y="${p.y + BOX_HEIGHT / 2 + 5}" ` +
        `text-anchor="middle">${escapeHtml(p.name)}</text></g>`,
    );
  }
  parts.push("</svg>");
  return parts.join("\n");
}
