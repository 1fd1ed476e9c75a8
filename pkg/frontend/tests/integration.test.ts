/**
 * End-to-end drive against a real simulation server.
 *
 * Spawns the Python backend, loads the interactive playground scenario
 * without running it, composes a bilingual warning through the typed
 * client exactly as the composer would, runs the clock, then jams the
 * genuine cell so the rogue captures two handsets.  Checks the whole
 * operator story: coding auto-flip parity with the server, display before
 * any registration traffic, lookalike-link flagging, verification badges,
 * and tap-through traces.
 */

import { spawn, type ChildProcess } from "node:child_process";
import net from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ApiClient, type Snapshot } from "../src/api.js";
import { preview } from "../src/codecPreview.js";
import { verdictBadgeText } from "../src/render.js";

const WARNING_TEXT =
  "تحذير فيضان " +
  "عاجل. Flood warning for the river district. " +
  "Details: https://t.co/x7Rq2";

let server: ChildProcess;
let api: ApiClient;
let snap: Snapshot;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.on("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const addr = probe.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no port"));
        return;
      }
      probe.close(() => resolve(addr.port));
    });
  });
}

async function waitReady(base: string): Promise<void> {
  const deadline = Date.now() + 30000;
  for (;;) {
    try {
      const resp = await fetch(base + "/api/sim");
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("server never came up");
    await new Promise((r) => setTimeout(r, 200));
  }
}

beforeAll(async () => {
  const port = await freePort();
  server = spawn(
    "python3",
    ["-m", "pwsim.cli", "serve", "--host", "127.0.0.1", "--port", String(port)],
    { stdio: "ignore" },
  );
  api = new ApiClient(`http://127.0.0.1:${port}`);
  await waitReady(api.base);
}, 40000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("operator flow against a live server", () => {
  it("loads the playground scenario paused", async () => {
    const out = (await api.loadScenario({ name: "demo_console", run: false })) as {
      loaded: string;
      run_until: number;
      now: number;
    };
    expect(out.loaded).toBe("demo_console");
    expect(out.run_until).toBe(30000);
    expect(out.now).toBe(0);
    const { scenarios } = await api.scenarios();
    expect(scenarios).toContain("demo_console");
  });

  it("broadcasts a composed warning on both genuine cells", async () => {
    const view = preview(WARNING_TEXT, "auto");
    expect(view.coding).toBe("ucs2"); // Arabic text forces the flip
    expect(view.tooLong).toBe(false);
    expect(view.pages).toBeGreaterThan(1);

    for (const pci of [10, 11]) {
      const out = (await api.startWarning(pci, {
        text: WARNING_TEXT,
        message_identifier: 4372,
        serial_number: 7,
        coding: "auto",
      })) as { warning_id: number };
      expect(out.warning_id).toBeGreaterThan(0);
    }

    const { warnings } = await api.warnings();
    const mine = warnings.filter((w) => w.payload?.message_identifier === 4372);
    expect(mine.map((w) => w.pci).sort()).toEqual([10, 11]);
    // server must have picked the same coding the composer predicted
    for (const w of mine) expect(w.payload?.coding).toBe(view.coding);
  });

  it("runs the scenario clock to its horizon", async () => {
    const out = await api.runFor(30000);
    expect(out.now).toBe(30000);
    snap = await api.snapshot();
    expect(snap.now).toBe(30000);
  });

  it("shows the composed alert with a clean link span", () => {
    const ue = snap.ues["1"];
    const alert = ue.alerts.find((a) => a.message_identifier === 4372);
    expect(alert).toBeDefined();
    expect(alert!.text).toBe(WARNING_TEXT);
    const span = alert!.spans.find((s) => s.kind === "WebUrl");
    expect(span).toBeDefined();
    expect(span!.contains_cyrillic).toBe(false);
    expect(WARNING_TEXT.slice(span!.start, span!.end)).toBe("https://t.co/x7Rq2");
  });

  it("reaches the tablet too while its one segment fits", () => {
    // three pages still ride in a single broadcast segment, so even the
    // profile that cannot stitch segments together shows the alert
    const displayed = snap.ues["3"].displayed.map((d) => d[0]);
    expect(displayed).toContain(4372);
    expect(displayed).not.toContain(4371);
  });

  it("displays before any registration traffic", async () => {
    const { events } = await api.events(-1);
    const seqs = events.map((e) => e.seq);
    for (let i = 1; i < seqs.length; i++) expect(seqs[i]).toBe(seqs[i - 1] + 1);

    const display = events.find(
      (e) => e.entity === "ue:1" && e.event === "alert_displayed",
    );
    const attempt = events.find(
      (e) => e.entity === "ue:1" && e.event === "registration_attempt",
    );
    expect(display).toBeDefined();
    expect(attempt).toBeDefined();
    expect(display!.seq).toBeLessThan(attempt!.seq);
  });

  it("verifies the composed warning against the neighbor cell", () => {
    const ue = snap.ues["1"];
    const mine = ue.alerts.find((a) => a.message_identifier === 4372)!;
    const verdict = ue.verdicts.find((v) => v.content_hash === mine.content_hash);
    expect(verdict).toBeDefined();
    expect(verdict!.status).toBe("Verified");
    expect(verdict!.matching_pcis).toEqual([11]);
    expect(verdictBadgeText(verdict!)).toBe("Verified (1 match)");
  });

  it("jams the serving cell so the rogue captures both handsets", async () => {
    const out = (await api.jam({ ue_ids: [1, 2], duration_ms: 5000 })) as {
      jammed: { ue_id: number; pci: number }[];
      until_ms: number;
    };
    expect(out.jammed.map((j) => j.ue_id)).toEqual([1, 2]);
    expect(out.until_ms).toBe(35000);

    await api.runFor(5000);
    snap = await api.snapshot();
    expect(snap.now).toBe(35000);

    for (const id of ["1", "2"]) {
      const rogue = snap.ues[id].alerts.find((a) => a.message_identifier === 4371);
      expect(rogue).toBeDefined();
      expect(rogue!.pci).toBe(66);
      // unverifiable content gets the rogue barred again
      expect(Object.keys(snap.ues[id].barred)).toContain("66");
    }
  });

  it("drops the lookalike link on the strict parser profile", () => {
    const rogue = snap.ues["1"].alerts.find((a) => a.message_identifier === 4371)!;
    expect(rogue.spans.some((s) => s.kind === "WebUrl")).toBe(false);
    expect(rogue.spans.some((s) => s.kind === "Phone")).toBe(true);
  });

  it("flags the lookalike link on the permissive profile", () => {
    const rogue = snap.ues["2"].alerts.find((a) => a.message_identifier === 4371)!;
    const span = rogue.spans.find((s) => s.kind === "WebUrl");
    expect(span).toBeDefined();
    expect(span!.contains_cyrillic).toBe(true);
  });

  it("leaves the rogue broadcast unverified", () => {
    const ue = snap.ues["2"];
    const rogue = ue.alerts.find((a) => a.message_identifier === 4371)!;
    const verdict = ue.verdicts.find((v) => v.content_hash === rogue.content_hash);
    expect(verdict).toBeDefined();
    expect(verdict!.status).toBe("Unverified");
    expect(verdict!.origin_pci).toBe(66);
    expect(verdictBadgeText(verdict!)).toBe("Unverified (scan exhausted)");
  });

  it("taps the rogue link and sees the browser open step", async () => {
    const alerts = snap.ues["2"].alerts;
    const alertIndex = alerts.findIndex((a) => a.message_identifier === 4371);
    const spanIndex = alerts[alertIndex].spans.findIndex((s) => s.kind === "WebUrl");
    const out = (await api.interact(2, {
      alert_index: alertIndex,
      span_index: spanIndex,
    })) as { trace: { step: string; app?: string; target?: string }[] };
    const open = out.trace[out.trace.length - 1];
    expect(open.step).toBe("OpenTarget");
    expect(open.app).toBe("browser");
    expect(open.target).toContain("sеcure"); // the lookalike host, verbatim
  });

  it("patches a cell through the typed client", async () => {
    await api.updateCell(66, { tx_active: false });
    const { cells } = await api.cells();
    const rogue = cells.find((c) => c.pci === 66);
    expect(rogue?.tx_active).toBe(false);
  });

  it("serves a parseable structured log", async () => {
    const text = await api.logText();
    const lines = text.trim().split("\n");
    expect(lines.length).toBeGreaterThan(50);
    const first = JSON.parse(lines[0]);
    expect(Object.keys(first)).toEqual(["t", "seq", "entity", "event", "detail"]);
  });
});
