/**
 * Typed HTTP client for the simulation server.
 *
 * Every function maps to exactly one endpoint and returns the parsed JSON
 * body.  Non-2xx responses raise ApiError carrying the status code and the
 * server's detail string so callers can surface rejects verbatim.
 */

export interface SimEvent {
  t: number;
  seq: number;
  entity: string;
  event: string;
  detail: Record<string, unknown>;
}

export interface Span {
  kind: string;
  start: number;
  end: number;
  contains_cyrillic: boolean;
}

export interface Alert {
  time_ms: number;
  message_identifier: number;
  serial_number: number;
  text: string;
  spans: Span[];
  pci: number;
  content_hash: string;
}

export interface Verdict {
  status: string;
  reason: string;
  content_hash: string;
  origin_pci: number;
  matching_pcis: number[];
  scanned_pcis: number[];
  started_ms: number;
  concluded_ms: number;
}

export interface WarningState {
  payload: {
    message_identifier: number;
    serial_number: number;
    coding: string;
    text: string;
  } | null;
  si_indexes: number[];
  si_budget: number;
  segments: number;
}

export interface CellSnapshot {
  pci: number;
  plmn: string;
  tac: number;
  cell_identity: number;
  carrier: number;
  is_rogue: boolean;
  tx_active: boolean;
  has_core: boolean;
  value_tag: number;
  dirty: boolean;
  si_slots_used: number;
  warnings: Record<string, WarningState>;
}

export interface UeSnapshot {
  imsi: string;
  profile: string;
  wants_data: boolean;
  locked: boolean;
  rrc: string;
  serving_pci: number | null;
  camped_class: string | null;
  displayed: [number, number][];
  alerts: Alert[];
  barred: Record<string, number>;
  verdicts: Verdict[];
}

export interface Snapshot {
  now: number;
  config: Record<string, unknown>;
  policy: Record<string, unknown> | null;
  cells: Record<string, CellSnapshot>;
  ues: Record<string, UeSnapshot>;
  subscribers: Record<string, Record<string, unknown>>;
  rx_power: Record<string, number>;
}

export interface SimInfo {
  now: number;
  cells: number;
  ues: number;
  warnings: number;
  events: number;
  config: Record<string, unknown>;
  policy: Record<string, unknown> | null;
  scenario: string | null;
  run_until: number | null;
}

export interface EventsPage {
  events: SimEvent[];
  cursor: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function request<T>(
  base: string,
  method: string,
  path: string,
  body?: unknown,
): Promise<T> {
  const init: RequestInit = { method };
  if (body !== undefined) {
    init.headers = { "content-type": "application/json" };
    init.body = JSON.stringify(body);
  }
  const resp = await fetch(base + path, init);
  const text = await resp.text();
  if (!resp.ok) {
    let detail = text;
    try {
      const parsed = JSON.parse(text);
      if (parsed && typeof parsed.detail === "string") detail = parsed.detail;
    } catch {
      // plain-text error body, keep as is
    }
    throw new ApiError(resp.status, detail);
  }
  return text ? (JSON.parse(text) as T) : (undefined as T);
}

export class ApiClient {
  constructor(public base: string = "") {}

  private get<T>(path: string): Promise<T> {
    return request<T>(this.base, "GET", path);
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return request<T>(this.base, "POST", path, body ?? {});
  }

  private patch<T>(path: string, body: unknown): Promise<T> {
    return request<T>(this.base, "PATCH", path, body);
  }

  private delete<T>(path: string): Promise<T> {
    return request<T>(this.base, "DELETE", path);
  }

  // -- clock and global state

  sim(): Promise<SimInfo> {
    return this.get("/api/sim");
  }

  snapshot(): Promise<Snapshot> {
    return this.get("/api/snapshot");
  }

  step(ms?: number): Promise<{ now: number }> {
    return this.post("/api/sim/step", ms === undefined ? {} : { ms });
  }

  runUntil(untilMs: number): Promise<{ now: number }> {
    return this.post("/api/sim/run", { until_ms: untilMs });
  }

  runFor(forMs: number): Promise<{ now: number }> {
    return this.post("/api/sim/run", { for_ms: forMs });
  }

  reset(): Promise<{ now: number }> {
    return this.post("/api/sim/reset");
  }

  // -- topology

  cells(): Promise<{ cells: CellSnapshot[] }> {
    return this.get("/api/cells");
  }

  addCell(args: Record<string, unknown>): Promise<unknown> {
    return this.post("/api/cells", args);
  }

  updateCell(pci: number, changes: Record<string, unknown>): Promise<unknown> {
    return this.patch(`/api/cells/${pci}`, changes);
  }

  // -- warnings

  warnings(): Promise<{ warnings: ({ warning_id: number; pci: number } & WarningState)[] }> {
    return this.get("/api/warnings");
  }

  startWarning(pci: number, args: Record<string, unknown>): Promise<unknown> {
    return this.post(`/api/cells/${pci}/warnings`, args);
  }

  updateWarning(warningId: number, changes: Record<string, unknown>): Promise<unknown> {
    return this.patch(`/api/warnings/${warningId}`, { changes });
  }

  stopWarning(warningId: number): Promise<unknown> {
    return this.delete(`/api/warnings/${warningId}`);
  }

  // -- devices

  ues(): Promise<{ ues: UeSnapshot[] }> {
    return this.get("/api/ues");
  }

  ueAlerts(ueId: number): Promise<{ alerts: Alert[] }> {
    return this.get(`/api/ues/${ueId}/alerts`);
  }

  ueVerdicts(ueId: number): Promise<{ verdicts: Verdict[] }> {
    return this.get(`/api/ues/${ueId}/verdicts`);
  }

  interact(ueId: number, args: Record<string, unknown>): Promise<unknown> {
    return this.post(`/api/ues/${ueId}/interact`, args);
  }

  jam(args: Record<string, unknown>): Promise<unknown> {
    return this.post("/api/jam", args);
  }

  applyPreset(name: string, args: Record<string, unknown>): Promise<unknown> {
    return this.post(`/api/presets/${name}/apply`, args);
  }

  // -- event feed

  events(since: number): Promise<EventsPage> {
    return this.get(`/api/events?since=${since}`);
  }

  streamUrl(since: number): string {
    return `${this.base}/api/events/stream?since=${since}`;
  }

  logText(): Promise<string> {
    return fetch(this.base + "/api/log").then((r) => {
      if (!r.ok) throw new ApiError(r.status, r.statusText);
      return r.text();
    });
  }

  // -- scenarios

  scenarios(): Promise<{ scenarios: string[] }> {
    return this.get("/api/scenarios");
  }

  loadScenario(body: Record<string, unknown>): Promise<unknown> {
    return this.post("/api/scenario/load", body);
  }
}
