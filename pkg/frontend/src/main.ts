/**
 * Browser entry point.  Holds no state the server does not also hold: every
 * repaint rebuilds from GET /api/snapshot, so a page refresh always comes
 * back to the same picture.  The event stream only decides when to repaint
 * and what to append to the timeline.
 */

import { ApiClient, ApiError, type Snapshot } from "./api.js";
import { preview, type Coding } from "./codecPreview.js";
import { connectStream, PollingFeed, type FeedState } from "./events.js";
import {
  renderCellRow,
  renderEventRow,
  renderUeScreen,
  escapeHtml,
} from "./render.js";

// same-origin by default; ?api=http://host:port points at a server elsewhere
const api = new ApiClient(
  new URLSearchParams(window.location.search).get("api") ?? "",
);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

let snap: Snapshot | null = null;
let refreshQueued = false;

// -- repaint ----------------------------------------------------------------

async function refresh(): Promise<void> {
  snap = await api.snapshot();
  const info = await api.sim();
  el("clock").textContent = `t = ${snap.now} ms`;
  el("scenario-name").textContent = info.scenario ?? "(none)";

  const cells = Object.values(snap.cells);
  el("cells-body").innerHTML = cells.map(renderCellRow).join("");

  el("phones").innerHTML = Object.entries(snap.ues)
    .map(
      ([id, ue]) =>
        `<div class="phone" data-ue="${id}"><div class="phone-screen">` +
        renderUeScreen(id, ue) +
        "</div>" +
        `<div class="phone-tools"><button class="small" data-jam="${id}">` +
        "jam 5 s</button></div></div>",
    )
    .join("");

  const warningList = cells.flatMap((c) =>
    Object.entries(c.warnings).map(([wid, w]) => {
      const p = w.payload;
      const label = p
        ? `id ${p.message_identifier} serial ${p.serial_number} (${p.coding})`
        : "stopped";
      return (
        `<li>warning ${wid} on pci ${c.pci}: ${escapeHtml(label)}, ` +
        `${w.segments} segment${w.segments === 1 ? "" : "s"} ` +
        `<button class="small" data-stop-warning="${wid}">stop</button></li>`
      );
    }),
  );
  el("warnings-list").innerHTML =
    warningList.join("") || "<li class='dim'>none active</li>";
}

function queueRefresh(): void {
  if (refreshQueued) return;
  refreshQueued = true;
  setTimeout(() => {
    refreshQueued = false;
    refresh().catch(showError);
  }, 80);
}

function showError(err: unknown): void {
  const msg =
    err instanceof ApiError ? `${err.status}: ${err.detail}` : String(err);
  const box = el("error-box");
  box.textContent = msg;
  box.classList.remove("hidden");
  setTimeout(() => box.classList.add("hidden"), 6000);
}

// -- connection banner ------------------------------------------------------

function onFeedState(state: FeedState): void {
  el("lost-banner").classList.toggle("hidden", state !== "lost");
}

function startFeed(): () => void {
  const timeline = el("timeline");
  const push = (events: { seq: number }[]) => {
    for (const ev of events) {
      timeline.insertAdjacentHTML(
        "beforeend",
        renderEventRow(ev as Parameters<typeof renderEventRow>[0]),
      );
    }
    while (timeline.childElementCount > 400) timeline.firstElementChild!.remove();
    timeline.scrollTop = timeline.scrollHeight;
    queueRefresh();
  };
  if (typeof EventSource !== "undefined") {
    return connectStream({
      streamUrl: (since) => api.streamUrl(since),
      onEvents: push,
      onState: onFeedState,
    });
  }
  const feed = new PollingFeed({
    source: (since) => api.events(since),
    onEvents: push,
    onState: onFeedState,
  });
  feed.start(500);
  return () => feed.stop();
}

// -- composer ---------------------------------------------------------------

function composerState() {
  const text = el<HTMLTextAreaElement>("warn-text").value;
  const coding = el<HTMLSelectElement>("warn-coding").value as Coding | "auto";
  return { text, coding, view: preview(text, coding) };
}

function updateComposerPreview(): void {
  const { view } = composerState();
  el("coding-indicator").textContent = view.coding === "ucs2" ? "16-bit" : "7-bit";
  el("coding-indicator").className =
    view.coding === "ucs2" ? "pill pill-ucs2" : "pill pill-gsm7";
  el("warn-counts").textContent =
    `${view.units}/${view.maxUnits} units · ${view.pages} page` +
    `${view.pages === 1 ? "" : "s"} · ${view.segments} segment` +
    `${view.segments === 1 ? "" : "s"}`;
  const notice = el("warn-notice");
  notice.textContent = view.notice ?? "";
  notice.classList.toggle("hidden", view.notice === null);
  el<HTMLButtonElement>("warn-send").disabled = view.tooLong || !view.encodable;
}

function selectedPcis(): number[] {
  const select = el<HTMLSelectElement>("warn-cells");
  return [...select.selectedOptions].map((o) => Number(o.value));
}

async function broadcast(): Promise<void> {
  const { text, coding, view } = composerState();
  if (view.tooLong || !view.encodable) return;
  const mid = Number(el<HTMLInputElement>("warn-mid").value);
  const serial = Number(el<HTMLInputElement>("warn-serial").value);
  if (!Number.isInteger(mid) || mid < 0 || mid > 0xffff)
    return showError("message identifier must be 0..65535");
  if (!Number.isInteger(serial) || serial < 0 || serial > 0xffff)
    return showError("serial number must be 0..65535");
  const pcis = selectedPcis();
  if (pcis.length === 0) return showError("pick at least one cell");
  for (const pci of pcis) {
    await api.startWarning(pci, {
      text,
      message_identifier: mid,
      serial_number: serial,
      coding,
    });
  }
  queueRefresh();
}

// -- control wiring ---------------------------------------------------------

async function populateStatics(): Promise<void> {
  const { scenarios } = await api.scenarios();
  el("scenario-pick").innerHTML = scenarios
    .map((s) => `<option>${escapeHtml(s)}</option>`)
    .join("");
  const cells = Object.values((snap ?? (await api.snapshot())).cells);
  el("warn-cells").innerHTML = cells
    .map((c) => `<option value="${c.pci}">pci ${c.pci} (${escapeHtml(c.plmn)})</option>`)
    .join("");
}

function wire(): void {
  el("warn-text").addEventListener("input", updateComposerPreview);
  el("warn-coding").addEventListener("change", updateComposerPreview);
  el("warn-send").addEventListener("click", () => broadcast().catch(showError));

  el("step-10").addEventListener("click", () => api.step(10).then(queueRefresh, showError));
  el("step-320").addEventListener("click", () => api.step(320).then(queueRefresh, showError));
  el("run-1s").addEventListener("click", () => api.runFor(1000).then(queueRefresh, showError));
  el("run-10s").addEventListener("click", () => api.runFor(10000).then(queueRefresh, showError));
  el("sim-reset").addEventListener("click", () =>
    api.reset().then(() => {
      el("timeline").innerHTML = "";
      return refresh().then(populateStatics);
    }, showError),
  );

  el("scenario-load").addEventListener("click", () => {
    const name = el<HTMLSelectElement>("scenario-pick").value;
    api
      .loadScenario({ name, run: false })
      .then(() => {
        el("timeline").innerHTML = "";
        return refresh().then(populateStatics);
      })
      .catch(showError);
  });

  el("preset-apply").addEventListener("click", () => {
    const name = el<HTMLSelectElement>("preset-pick").value;
    const pci = Number(el<HTMLInputElement>("preset-pci").value);
    if (!Number.isInteger(pci)) return showError("preset needs a cell pci");
    api.applyPreset(name, { pci }).then(queueRefresh, showError);
  });

  el("cell-add").addEventListener("click", () => {
    const pci = Number(el<HTMLInputElement>("cell-pci").value);
    const plmn = el<HTMLInputElement>("cell-plmn").value.trim();
    const tac = Number(el<HTMLInputElement>("cell-tac").value);
    const carrier = Number(el<HTMLInputElement>("cell-carrier").value);
    if (!Number.isInteger(pci) || pci < 0) return showError("pci must be a non-negative integer");
    if (!/^\d{5,6}$/.test(plmn)) return showError("plmn must be 5 or 6 digits");
    const args: Record<string, unknown> = { pci, plmn };
    if (Number.isInteger(tac)) args.tac = tac;
    if (Number.isInteger(carrier)) args.carrier = carrier;
    if (el<HTMLInputElement>("cell-rogue").checked) {
      args.is_rogue = true;
      args.has_core = false;
    }
    api
      .addCell(args)
      .then(() => refresh().then(populateStatics))
      .catch(showError);
  });

  // tap-to-interact: clicks on alert spans inside a phone mockup
  el("phones").addEventListener("click", (evt) => {
    const target = evt.target as HTMLElement;
    const jamBtn = target.closest<HTMLElement>("[data-jam]");
    if (jamBtn) {
      api
        .jam({ ue_ids: [Number(jamBtn.dataset.jam)], duration_ms: 5000 })
        .then(queueRefresh, showError);
      return;
    }
    const spanEl = target.closest<HTMLElement>(".alert-span");
    if (!spanEl) return;
    const alertEl = spanEl.closest<HTMLElement>(".alert-card");
    const phoneEl = spanEl.closest<HTMLElement>(".phone");
    if (!alertEl || !phoneEl) return;
    const ueId = Number(phoneEl.dataset.ue);
    const alertIndex = Number(alertEl.dataset.alert);
    const spanIndex = Number(spanEl.dataset.span);
    api
      .interact(ueId, { alert_index: alertIndex, span_index: spanIndex })
      .then(queueRefresh, showError);
  });

  el("warnings-list").addEventListener("click", (evt) => {
    const btn = (evt.target as HTMLElement).closest<HTMLElement>("[data-stop-warning]");
    if (!btn) return;
    api.stopWarning(Number(btn.dataset.stopWarning)).then(queueRefresh, showError);
  });

  el("lost-retry").addEventListener("click", () => {
    stopFeed();
    stopFeed = startFeed();
  });
}

let stopFeed: () => void = () => {};

async function boot(): Promise<void> {
  wire();
  await refresh();
  await populateStatics();
  updateComposerPreview();
  stopFeed = startFeed();
}

boot().catch(showError);
