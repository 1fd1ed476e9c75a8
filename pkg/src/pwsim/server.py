"""HTTP control plane.

A thin, lock-serialized wrapper around one Simulation instance.  Every
mutation goes through the command path, so anything done over HTTP is
reproducible from the event log.  Reads return snapshots taken under the
same lock, which keeps concurrent readers consistent while a writer
advances the clock.
"""

from __future__ import annotations

import json
import threading
from importlib import resources
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, StreamingResponse

from . import codec
from .events import dump_log
from .presets import apply_preset
from .radio import DuplicatePci, RadioError
from .scenario import (BadScenario, build_simulation, evaluate_expectations,
                       load_scenario, validate_cell_args, validate_warning_args)
from .sim import CommandError, Simulation
from .ue import UeError


class SimManager:
    """Owns the simulation and serializes all access."""

    def __init__(self, log_path: str | None = None):
        self._lock = threading.RLock()
        self._wakeup = threading.Condition(self._lock)
        self.sim = Simulation()
        self.scenario: dict | None = None
        self.log_path = Path(log_path) if log_path else None
        self._flushed = 0
        if self.log_path:
            self.log_path.write_text("", encoding="utf-8")

    def _after_change(self) -> None:
        if self.log_path and len(self.sim.events) > self._flushed:
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(dump_log(self.sim.events[self._flushed:]))
            self._flushed = len(self.sim.events)
        self._wakeup.notify_all()

    def command(self, op: str, args: dict) -> dict:
        with self._lock:
            try:
                result = self.sim.apply_now(op, args)
            except CommandError:
                raise
            except DuplicatePci as exc:
                raise CommandError(409, str(exc)) from exc
            except (RadioError, codec.CodecError, UeError, ValueError) as exc:
                raise CommandError(422, str(exc)) from exc
            finally:
                self._after_change()
            return result

    def run_to(self, until_ms: int) -> dict:
        with self._lock:
            try:
                produced = self.sim.run(until_ms)
            except ValueError as exc:
                raise CommandError(422, str(exc)) from exc
            finally:
                self._after_change()
            return {"now": self.sim.now, "events": len(produced)}

    def step(self, ms: int | None) -> dict:
        with self._lock:
            return self.run_to(self.sim.now + (ms if ms is not None else
                                               self.sim.config.measurement_period_ms))

    def reset(self) -> None:
        with self._lock:
            self.sim = Simulation()
            self.scenario = None
            self._flushed = 0
            if self.log_path:
                self.log_path.write_text("", encoding="utf-8")
            self._wakeup.notify_all()

    def load_scenario(self, scn: dict, run: bool) -> dict:
        with self._lock:
            if self.sim.cells or self.sim.ues:
                raise CommandError(409, "simulation is not empty; reset first")
            self.sim = Simulation()
            self._flushed = 0
            if self.log_path:
                self.log_path.write_text("", encoding="utf-8")
            try:
                self.sim = build_simulation(scn)
            finally:
                self._after_change()
            self.scenario = scn
            out = {"loaded": scn["name"], "run_until": scn["run_until"], "now": self.sim.now}
            if run:
                self.run_to(scn["run_until"])
                out["now"] = self.sim.now
                out["summary"] = evaluate_expectations(self.sim, scn)
            return out

    def events_since(self, cursor: int) -> tuple[list, int]:
        with self._lock:
            events = self.sim.events_since(cursor)
            return list(events), len(self.sim.events) - 1

    def wait_events(self, cursor: int, timeout: float) -> list:
        with self._wakeup:
            if len(self.sim.events) - 1 <= cursor:
                self._wakeup.wait(timeout)
            return list(self.sim.events_since(cursor))

    def snapshot(self) -> dict:
        with self._lock:
            return self.sim.snapshot()

    def log_text(self) -> str:
        with self._lock:
            return dump_log(self.sim.events)


def packaged_scenarios() -> dict[str, Path]:
    root = resources.files("pwsim").joinpath("scenarios")
    return {p.name[:-5]: p for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".json")}


def create_app(manager: SimManager | None = None) -> FastAPI:
    mgr = manager or SimManager()
    app = FastAPI(title="warning-broadcast testbed", version="0.1.0")
    app.state.manager = mgr
    # the operator console is served separately; everything here is a
    # local testbed, so wide-open CORS is fine
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    def fail(exc: Exception):
        if isinstance(exc, CommandError):
            raise HTTPException(exc.status, str(exc))
        if isinstance(exc, BadScenario):
            raise HTTPException(422, str(exc))
        raise exc

    async def body_of(request: Request) -> dict:
        raw = await request.body()
        if not raw:
            return {}
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise HTTPException(422, f"body is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise HTTPException(422, "body must be a JSON object")
        return data

    # -- topology --------------------------------------------------------

    @app.get("/api/cells")
    def get_cells():
        with mgr._lock:
            return {"cells": [mgr.sim.cell_snapshot(mgr.sim.cells[p])
                              for p in sorted(mgr.sim.cells)]}

    @app.post("/api/cells", status_code=201)
    async def post_cell(request: Request):
        args = await body_of(request)
        try:
            validate_cell_args(args, "cell")
            return mgr.command("add_cell", args)
        except (CommandError, BadScenario) as exc:
            fail(exc)

    @app.patch("/api/cells/{pci}")
    async def patch_cell(pci: int, request: Request):
        changes = await body_of(request)
        try:
            return mgr.command("update_cell", {"pci": pci, "changes": changes})
        except CommandError as exc:
            fail(exc)

    @app.post("/api/cells/{pci}/warnings", status_code=201)
    async def post_warning(pci: int, request: Request):
        args = {**(await body_of(request)), "pci": pci}
        try:
            validate_warning_args(args, "warning")
            return mgr.command("start_warning", args)
        except (CommandError, BadScenario) as exc:
            fail(exc)

    @app.get("/api/warnings")
    def get_warnings():
        with mgr._lock:
            out = []
            for wid in sorted(mgr.sim.warning_cell):
                pci = mgr.sim.warning_cell[wid]
                snap = mgr.sim.cell_snapshot(mgr.sim.cells[pci])["warnings"][str(wid)]
                out.append({"warning_id": wid, "pci": pci, **snap})
            return {"warnings": out}

    @app.patch("/api/warnings/{warning_id}")
    async def patch_warning(warning_id: int, request: Request):
        body = await body_of(request)
        changes = body.get("changes", body)
        try:
            return mgr.command("update_warning",
                               {"warning_id": warning_id, "changes": changes})
        except CommandError as exc:
            fail(exc)

    @app.delete("/api/warnings/{warning_id}")
    async def delete_warning(warning_id: int):
        try:
            return mgr.command("stop_warning", {"warning_id": warning_id})
        except CommandError as exc:
            fail(exc)

    # -- subscribers -----------------------------------------------------

    @app.get("/api/subscribers")
    def get_subscribers():
        with mgr._lock:
            return {"subscribers": [mgr.sim.subscribers[i].to_json()
                                    for i in sorted(mgr.sim.subscribers)]}

    @app.post("/api/subscribers", status_code=201)
    async def post_subscriber(request: Request):
        try:
            return mgr.command("add_subscriber", await body_of(request))
        except CommandError as exc:
            fail(exc)

    @app.patch("/api/subscribers/{imsi}")
    async def patch_subscriber(imsi: str, request: Request):
        try:
            return mgr.command("update_subscriber",
                               {**(await body_of(request)), "imsi": imsi})
        except CommandError as exc:
            fail(exc)

    @app.delete("/api/subscribers/{imsi}")
    async def delete_subscriber(imsi: str):
        try:
            return mgr.command("remove_subscriber", {"imsi": imsi})
        except CommandError as exc:
            fail(exc)

    # -- devices ---------------------------------------------------------

    @app.get("/api/ues")
    def get_ues():
        with mgr._lock:
            return {"ues": [mgr.sim.ues[i].snapshot() for i in sorted(mgr.sim.ues)]}

    @app.get("/api/ues/{ue_id}/alerts")
    def get_alerts(ue_id: int):
        with mgr._lock:
            ue = mgr.sim.ues.get(ue_id)
            if ue is None:
                raise HTTPException(404, f"no ue {ue_id}")
            return {"alerts": [a.to_json() for a in ue.alerts]}

    @app.get("/api/ues/{ue_id}/verdicts")
    def get_verdicts(ue_id: int):
        with mgr._lock:
            ue = mgr.sim.ues.get(ue_id)
            if ue is None:
                raise HTTPException(404, f"no ue {ue_id}")
            return {"verdicts": [v.to_json() for v in ue.verdicts]}

    @app.post("/api/ues/{ue_id}/interact")
    async def post_interact(ue_id: int, request: Request):
        args = {**(await body_of(request)), "ue_id": ue_id}
        try:
            return mgr.command("interact", args)
        except CommandError as exc:
            fail(exc)

    @app.post("/api/jam")
    async def post_jam(request: Request):
        try:
            return mgr.command("jam", await body_of(request))
        except CommandError as exc:
            fail(exc)

    # -- presets ---------------------------------------------------------

    @app.post("/api/presets/{name}/apply")
    async def post_preset(name: str, request: Request):
        args = await body_of(request)
        with mgr._lock:
            try:
                result = apply_preset(mgr.sim, name, args)
            except CommandError as exc:
                fail(exc)
            finally:
                mgr._after_change()
            return result

    # -- events ----------------------------------------------------------

    @app.get("/api/events")
    def get_events(since: int = -1):
        events, cursor = mgr.events_since(since)
        return {"events": [json.loads(e.to_json()) for e in events], "cursor": cursor}

    @app.get("/api/events/stream")
    def stream_events(request: Request, since: int = -1, limit: int | None = None):
        # limit bounds the stream so test clients can read it to completion;
        # live consoles omit it and reconnect with Last-Event-ID on drops
        last_id = request.headers.get("last-event-id")
        cursor = int(last_id) if last_id and last_id.lstrip("-").isdigit() else since

        def gen(cursor: int):
            yield ": connected\n\n"
            sent = 0
            while limit is None or sent < limit:
                events = mgr.wait_events(cursor, timeout=1.0)
                if not events:
                    yield ": keepalive\n\n"
                    continue
                for ev in events:
                    cursor = ev.seq
                    yield f"id: {ev.seq}\ndata: {ev.to_json()}\n\n"
                    sent += 1
                    if limit is not None and sent >= limit:
                        return

        return StreamingResponse(gen(cursor), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-store"})

    @app.get("/api/log", response_class=PlainTextResponse)
    def get_log():
        return mgr.log_text()

    # -- clock and lifecycle ---------------------------------------------

    @app.get("/api/sim")
    def get_sim():
        with mgr._lock:
            sim = mgr.sim
            return {
                "now": sim.now,
                "cells": len(sim.cells),
                "ues": len(sim.ues),
                "warnings": len(sim.warning_cell),
                "events": len(sim.events),
                "config": sim.config.to_json(),
                "policy": sim.policy.to_json() if sim.policy else None,
                "scenario": mgr.scenario["name"] if mgr.scenario else None,
                "run_until": mgr.scenario["run_until"] if mgr.scenario else None,
            }

    @app.post("/api/sim/step")
    async def post_step(request: Request):
        body = await body_of(request)
        try:
            return mgr.step(body.get("ms"))
        except CommandError as exc:
            fail(exc)

    @app.post("/api/sim/run")
    async def post_run(request: Request):
        body = await body_of(request)
        try:
            if "until_ms" in body:
                return mgr.run_to(int(body["until_ms"]))
            if "for_ms" in body:
                with mgr._lock:
                    return mgr.run_to(mgr.sim.now + int(body["for_ms"]))
            raise CommandError(422, "body needs until_ms or for_ms")
        except CommandError as exc:
            fail(exc)

    @app.post("/api/sim/reset")
    def post_reset():
        mgr.reset()
        return {"now": 0}

    @app.get("/api/snapshot")
    def get_snapshot():
        return mgr.snapshot()

    # -- scenarios -------------------------------------------------------

    @app.get("/api/scenarios")
    def get_scenarios():
        return {"scenarios": sorted(packaged_scenarios())}

    @app.post("/api/scenario/load")
    async def post_scenario(request: Request):
        body = await body_of(request)
        try:
            if "name" in body:
                known = packaged_scenarios()
                if body["name"] not in known:
                    raise CommandError(404, f"unknown scenario {body['name']!r}")
                scn = load_scenario(known[body["name"]].read_text(encoding="utf-8"))
            elif "path" in body:
                scn = load_scenario(body["path"])
            elif "scenario" in body:
                scn = load_scenario(body["scenario"])
            else:
                raise CommandError(422, "body needs name, path or scenario")
            return mgr.load_scenario(scn, run=bool(body.get("run", False)))
        except (CommandError, BadScenario) as exc:
            fail(exc)

    @app.get("/api/scenario/summary")
    def get_summary():
        with mgr._lock:
            if mgr.scenario is None:
                raise HTTPException(404, "no scenario loaded")
            return evaluate_expectations(mgr.sim, mgr.scenario)

    return app


def default_app() -> FastAPI:
    return create_app(SimManager())
