/**
 * Pure string renderers for the console.
 *
 * Everything here turns server JSON into HTML strings with no DOM access,
 * so the unit tests can assert on output directly.  All text that came
 * over the wire goes through escapeHtml before it is interpolated.
 */

import type { Alert, CellSnapshot, SimEvent, Span, UeSnapshot, Verdict } from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const SPAN_CLASS: Record<string, string> = {
  WebUrl: "span-url",
  Email: "span-email",
  Phone: "span-phone",
  MapAddress: "span-map",
};

/**
 * Alert body with tappable spans marked up.  A span whose text mixes in
 * Cyrillic letters gets a warning glyph so look-alike URLs stand out.
 * Span offsets index UTF-16 code units, same as the server's parser.
 */
export function renderAlertText(text: string, spans: Span[]): string {
  const ordered = [...spans].sort((a, b) => a.start - b.start);
  let out = "";
  let pos = 0;
  for (let i = 0; i < ordered.length; i++) {
    const s = ordered[i];
    if (s.start < pos) continue; // overlapping span, keep the earlier one
    out += escapeHtml(text.slice(pos, s.start));
    const cls = SPAN_CLASS[s.kind] ?? "span-other";
    const flag = s.contains_cyrillic
      ? '<span class="homoglyph-flag" title="mixes Cyrillic look-alike characters">⚠</span>'
      : "";
    out +=
      `<span class="alert-span ${cls}" data-span="${i}">` +
      escapeHtml(text.slice(s.start, s.end)) +
      flag +
      "</span>";
    pos = s.end;
  }
  out += escapeHtml(text.slice(pos));
  return out;
}

const REASON_LABEL: Record<string, string> = {
  EnoughMatches: "matches",
  NoNeighbors: "no neighbors",
  ScanExhausted: "scan exhausted",
  Timeout: "timed out",
};

/** Short badge text, e.g. "Verified (2 matches)" or "Unverified (scan exhausted)". */
export function verdictBadgeText(v: Verdict): string {
  if (v.status === "Verified") {
    const n = v.matching_pcis.length;
    return `Verified (${n} ${n === 1 ? "match" : "matches"})`;
  }
  return `Unverified (${REASON_LABEL[v.reason] ?? v.reason})`;
}

export function renderVerdictBadge(v: Verdict): string {
  const cls = v.status === "Verified" ? "badge-verified" : "badge-unverified";
  const detail =
    `origin pci ${v.origin_pci}, scanned [${v.scanned_pcis.join(", ")}], ` +
    `matched [${v.matching_pcis.join(", ")}], ` +
    `${v.started_ms}–${v.concluded_ms} ms`;
  return `<span class="badge ${cls}" title="${escapeHtml(detail)}">${escapeHtml(
    verdictBadgeText(v),
  )}</span>`;
}

export function renderAlertCard(alert: Alert, index: number): string {
  return (
    `<div class="alert-card" data-alert="${index}">` +
    `<div class="alert-head">id ${alert.message_identifier} ` +
    `serial ${alert.serial_number} · pci ${alert.pci} · t=${alert.time_ms} ms</div>` +
    `<div class="alert-body">${renderAlertText(alert.text, alert.spans)}</div>` +
    "</div>"
  );
}

/** Contents of one phone mockup: status line plus every displayed alert. */
export function renderUeScreen(id: string, ue: UeSnapshot): string {
  const serving =
    ue.serving_pci === null ? "no service" : `pci ${ue.serving_pci} (${ue.camped_class})`;
  const barred = Object.keys(ue.barred);
  const parts = [
    `<div class="ue-status"><b>ue ${escapeHtml(id)}</b> ${escapeHtml(ue.profile)}` +
      ` · ${escapeHtml(ue.rrc)} · ${escapeHtml(serving)}</div>`,
  ];
  if (barred.length > 0) {
    parts.push(`<div class="ue-barred">barred: ${escapeHtml(barred.join(", "))}</div>`);
  }
  if (ue.alerts.length === 0) {
    parts.push('<div class="ue-empty">no warnings shown</div>');
  }
  ue.alerts.forEach((a, i) => parts.push(renderAlertCard(a, i)));
  ue.verdicts.forEach((v) => parts.push(renderVerdictBadge(v)));
  return parts.join("\n");
}

export function renderCellRow(cell: CellSnapshot): string {
  const warnings = Object.keys(cell.warnings).length;
  const tags = [
    cell.is_rogue ? '<span class="tag tag-rogue">rogue</span>' : "",
    cell.has_core ? "" : '<span class="tag tag-nocore">no core</span>',
    cell.tx_active ? "" : '<span class="tag tag-off">tx off</span>',
  ].join("");
  return (
    `<tr data-pci="${cell.pci}">` +
    `<td>${cell.pci}${tags}</td>` +
    `<td>${escapeHtml(cell.plmn)}</td>` +
    `<td>${cell.tac}</td>` +
    `<td>${cell.carrier}</td>` +
    `<td>${warnings}</td>` +
    `<td>${cell.si_slots_used}/32</td>` +
    "</tr>"
  );
}

/** One timeline line: fixed-width time, entity, event name, compact detail. */
export function renderEventRow(ev: SimEvent): string {
  const detail = JSON.stringify(ev.detail);
  const shown = detail.length > 160 ? detail.slice(0, 157) + "…" : detail;
  return (
    `<div class="ev ev-${escapeHtml(ev.event)}">` +
    `<span class="ev-t">${String(ev.t).padStart(7)}</span> ` +
    `<span class="ev-entity">${escapeHtml(ev.entity)}</span> ` +
    `<span class="ev-name">${escapeHtml(ev.event)}</span> ` +
    `<span class="ev-detail">${escapeHtml(shown)}</span>` +
    "</div>"
  );
}
