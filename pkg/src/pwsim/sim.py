"""Deterministic simulation engine.

Integer-millisecond discrete-event loop.  Everything that happens is
either a command (operator action), a timer (UE-internal), or a
broadcast (cell emission); at equal timestamps commands run first, then
timers, then broadcasts, each sub-ordered by a fixed entity key and a
scheduling tiebreak.  Identical command sequences therefore produce
byte-identical event logs.

Operator mutations enter through submit()/apply_now() and are logged as
command records with enough detail to rebuild the run from the log.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, fields, replace

from . import codec
from .events import SimEvent
from .linkify import default_tlds
from .radio import (Cell, CellConfig, DuplicatePci, RadioError,
                    TooManySiMessages, UnknownWarning)
from .ue import Rrc, Ue, UeError, profile_from_json
from .verify import AlreadyVerifying, VerificationPolicy, begin_verification

PHASE_COMMAND = 0
PHASE_TIMER = 1
PHASE_BROADCAST = 2


@dataclass(frozen=True)
class SimConfig:
    sib1_period_ms: int = 160
    si_period_ms: int = 320
    paging_period_ms: int = 320
    measurement_period_ms: int = 160
    detection_threshold_dbm: float = -110.0
    acceptable_fallback_delay_ms: int = 10000
    reselection_hysteresis_db: float = 3.0
    cell_bar_ms: int = 300000
    registration_retry_interval_ms: int = 1000
    rach_delay_ms: int = 20
    si_budget: int = codec.DEFAULT_SI_BUDGET

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class SubscriberEntry:
    imsi: str
    display_name: str
    hplmn: str

    def validate(self) -> None:
        if len(self.imsi) != 15 or not self.imsi.isdigit():
            raise ValueError("imsi must be exactly 15 digits")
        if not self.display_name:
            raise ValueError("display_name must be non-empty")

    def to_json(self) -> dict:
        return {"imsi": self.imsi, "display_name": self.display_name, "hplmn": self.hplmn}


class CommandError(Exception):
    """Raised when a command cannot be applied; maps to an API error."""

    def __init__(self, status: int, message: str):
        self.status = status
        super().__init__(message)


class Simulation:
    def __init__(self, config: SimConfig | None = None,
                 policy: VerificationPolicy | None = None):
        self.config = config or SimConfig()
        self.policy = policy
        self.tlds = default_tlds()
        self.now = 0
        self.events: list[SimEvent] = []
        self._heap: list = []
        self._tie = 0
        self.cells: dict[int, Cell] = {}
        self.ues: dict[int, Ue] = {}
        self.rx_power: dict[tuple[int, int], float] = {}
        self.subscribers: dict[str, SubscriberEntry] = {}
        self.warning_cell: dict[int, int] = {}
        self._next_warning_id = 1
        self._jams: list[dict] = []
        self.dump_si_hex = False

    # -- event plumbing ----------------------------------------------------

    def emit(self, entity: str, event: str, detail: dict) -> SimEvent:
        ev = SimEvent(time_ms=self.now, seq=len(self.events), entity=entity,
                      event=event, detail=detail)
        self.events.append(ev)
        return ev

    def events_since(self, cursor: int) -> list[SimEvent]:
        """Events with seq strictly greater than cursor (-1 for all)."""
        return self.events[cursor + 1:]

    def schedule(self, time_ms: int, phase: int, key: tuple[int, int, int], fn) -> None:
        self._tie += 1
        heapq.heappush(self._heap, (time_ms, phase, key, self._tie, fn))

    def schedule_timer(self, time_ms: int, ue_id: int, kind: int, fn) -> None:
        self.schedule(time_ms, PHASE_TIMER, (ue_id, kind, 0), fn)

    def run(self, until_ms: int) -> list[SimEvent]:
        if until_ms < self.now:
            raise ValueError("cannot run backwards")
        start = len(self.events)
        while self._heap and self._heap[0][0] <= until_ms:
            time_ms, _phase, _key, _tie, fn = heapq.heappop(self._heap)
            self.now = time_ms
            fn(time_ms)
        self.now = until_ms
        self.emit("sim", "clock", {"until_ms": until_ms})
        return self.events[start:]

    def step(self, ms: int | None = None) -> list[SimEvent]:
        return self.run(self.now + (ms if ms is not None else self.config.measurement_period_ms))

    # -- topology ----------------------------------------------------------

    def _jammed(self, ue_id: int, pci: int) -> bool:
        return any(j["ue_id"] == ue_id and j["pci"] == pci and self.now < j["until_ms"]
                   for j in self._jams)

    def visible_cells(self, ue_id: int, now: int | None = None) -> list[tuple[Cell, float]]:
        out = []
        for pci in sorted(self.cells):
            cell = self.cells[pci]
            if not cell.config.tx_active:
                continue
            rx = self.rx_power.get((ue_id, pci))
            if rx is None or rx < self.config.detection_threshold_dbm:
                continue
            if self._jammed(ue_id, pci):
                continue
            out.append((cell, rx))
        return out

    def cell_accepts_registration(self, pci: int, imsi: str) -> bool:
        cell = self.cells.get(pci)
        return bool(cell and cell.config.has_core and imsi in self.subscribers)

    def _ues_sorted(self) -> list[Ue]:
        return [self.ues[i] for i in sorted(self.ues)]

    # -- broadcast grids ---------------------------------------------------

    def _schedule_sib1(self, pci: int, t: int) -> None:
        def fire(time_ms):
            cell = self.cells.get(pci)
            if cell is not None:
                if cell.config.tx_active:
                    sib1 = cell.sib1()
                    self.emit(f"cell:{pci}", "sib1_broadcast", {
                        "pci": pci, "plmn": sib1.plmn, "value_tag": sib1.value_tag,
                        "si_count": len(sib1.scheduling)})
                    for ue in self._ues_sorted():
                        if any(c.config.pci == pci for c, _ in self.visible_cells(ue.ue_id)):
                            ue.on_sib1(time_ms, sib1)
                self._schedule_sib1(pci, time_ms + self.config.sib1_period_ms)
        self.schedule(t, PHASE_BROADCAST, (pci, 0, 0), fire)

    def _schedule_si_slot(self, pci: int, si_index: int, t: int) -> None:
        def fire(time_ms):
            cell = self.cells.get(pci)
            if cell is not None:
                if cell.config.tx_active:
                    result = cell.si_broadcast(si_index)
                    if result is not None:
                        broadcast, state = result
                        seg = state.segments[cell.slots[si_index][1]]
                        detail = {
                            "pci": pci, "si_index": si_index,
                            "warning_id": state.warning_id,
                            "message_identifier": seg.message_identifier,
                            "serial_number": seg.serial_number,
                            "segment_number": seg.segment_number,
                            "is_last": seg.is_last,
                            "body_len": len(broadcast.body),
                        }
                        if self.dump_si_hex:
                            detail["body_hex"] = codec.hex_dump(broadcast.body)
                        self.emit(f"cell:{pci}", "si_broadcast", detail)
                        for ue in self._ues_sorted():
                            if any(c.config.pci == pci for c, _ in self.visible_cells(ue.ue_id)):
                                ue.on_si(time_ms, broadcast)
                self._schedule_si_slot(pci, si_index, time_ms + self.config.si_period_ms)
        self.schedule(t, PHASE_BROADCAST, (pci, 1, si_index), fire)

    def _schedule_paging(self, pci: int, t: int) -> None:
        def fire(time_ms):
            cell = self.cells.get(pci)
            if cell is not None:
                if cell.config.tx_active:
                    msg = cell.take_paging()
                    if msg is not None:
                        self.emit(f"cell:{pci}", "paging_broadcast", {
                            "pci": pci, "si_modification": msg.si_modification,
                            "etws_cmas_indication": msg.etws_cmas_indication})
                        for ue in self._ues_sorted():
                            if any(c.config.pci == pci for c, _ in self.visible_cells(ue.ue_id)):
                                ue.on_paging(time_ms, msg)
                self._schedule_paging(pci, time_ms + self.config.paging_period_ms)
        self.schedule(t, PHASE_BROADCAST, (pci, 2, 0), fire)

    def _schedule_ue_tick(self, ue_id: int, t: int) -> None:
        def fire(time_ms):
            ue = self.ues.get(ue_id)
            if ue is not None:
                ue.on_tick(time_ms)
                self._schedule_ue_tick(ue_id, time_ms + self.config.measurement_period_ms)
        self.schedule(t, PHASE_TIMER, (ue_id, 1, 0), fire)

    # -- display hook ------------------------------------------------------

    def on_alert_displayed(self, ue: Ue, alert) -> None:
        if self.policy is None:
            return
        try:
            begin_verification(self, ue, alert.content_hash, alert.pci, self.policy)
        except AlreadyVerifying:
            ue.emit("verification_skipped", {
                "message_identifier": alert.message_identifier,
                "serial_number": alert.serial_number,
                "reason": "already_verifying"})

    # -- command machinery -------------------------------------------------

    def apply_now(self, op: str, args: dict) -> dict:
        """Validate and apply immediately at the current simulated time."""
        handler = getattr(self, f"_cmd_{op}", None)
        if handler is None:
            raise CommandError(422, f"unknown operation {op!r}")
        result = handler(args)
        self.emit("op", "command_accepted", {"op": op, "args": args, "result": result})
        return result

    def submit(self, op: str, args: dict, at_ms: int) -> int:
        """Queue a command for a future simulated time.  Returns apply time."""
        t = max(at_ms, self.now)

        def fire(_time_ms):
            try:
                self.apply_now(op, args)
            except (CommandError, RadioError, codec.CodecError, UeError, ValueError) as exc:
                self.emit("op", "command_rejected", {
                    "op": op, "args": args,
                    "reason": f"{type(exc).__name__}: {exc}"})
        self._tie += 1
        self.schedule(t, PHASE_COMMAND, (0, 0, self._tie), fire)
        return t

    # -- command handlers --------------------------------------------------

    def _cmd_configure(self, args: dict) -> dict:
        if self.cells or self.ues:
            raise CommandError(409, "configure must precede cells and ues")
        if args.get("config"):
            self.config = SimConfig.from_json({**self.config.to_json(), **args["config"]})
        if args.get("policy") is not None:
            pol = args["policy"]
            self.policy = VerificationPolicy(
                max_cells_to_scan=int(pol.get("max_cells_to_scan", 4)),
                required_matches=int(pol.get("required_matches", 2)),
                scan_timeout_ms=int(pol.get("scan_timeout_ms", 20000)),
                carrier_list=tuple(pol.get("carrier_list", [0])),
            )
            self.policy.validate()
        if args.get("tlds") is not None:
            self.tlds = frozenset(t.lower() for t in args["tlds"])
        return {}

    def _cmd_add_cell(self, args: dict) -> dict:
        cfg = CellConfig(
            pci=int(args["pci"]), plmn=args["plmn"], tac=int(args.get("tac", 1)),
            cell_identity=int(args.get("cell_identity", args["pci"])),
            carrier=int(args.get("carrier", 0)),
            is_rogue=bool(args.get("is_rogue", False)),
            tx_active=bool(args.get("tx_active", True)),
            has_core=bool(args.get("has_core", False)),
        )
        cfg.validate()
        if cfg.pci in self.cells:
            raise DuplicatePci(f"pci {cfg.pci} already exists")
        cell = Cell(config=cfg, si_period_ms=self.config.si_period_ms)
        self.cells[cfg.pci] = cell
        self.emit(f"cell:{cfg.pci}", "cell_started", {
            "pci": cfg.pci, "plmn": cfg.plmn, "tac": cfg.tac,
            "cell_identity": cfg.cell_identity, "carrier": cfg.carrier,
            "is_rogue": cfg.is_rogue, "has_core": cfg.has_core,
            "tx_active": cfg.tx_active})
        window = max(1, self.config.si_period_ms // 32)
        self._schedule_sib1(cfg.pci, self.now)
        for idx in range(32):
            self._schedule_si_slot(cfg.pci, idx, self.now + idx * window)
        self._schedule_paging(cfg.pci, self.now)
        return {"pci": cfg.pci}

    def _cmd_update_cell(self, args: dict) -> dict:
        pci = int(args["pci"])
        cell = self.cells.get(pci)
        if cell is None:
            raise CommandError(404, f"no cell with pci {pci}")
        changes = args.get("changes", {})
        allowed = {"plmn", "tac", "cell_identity", "tx_active", "has_core", "is_rogue"}
        unknown = set(changes) - allowed
        if unknown:
            raise CommandError(422, f"cannot change fields: {sorted(unknown)}")
        trial = replace(cell.config, **changes)
        trial.validate()
        content_changed = any(getattr(cell.config, k) != getattr(trial, k)
                              for k in ("plmn", "tac", "cell_identity"))
        cell.config = trial
        if content_changed:
            cell.mark_dirty()
        self.emit(f"cell:{pci}", "cell_updated", {"pci": pci, "changes": changes})
        return {"pci": pci}

    def _cmd_set_power(self, args: dict) -> dict:
        ue_id = int(args["ue_id"])
        pci = int(args["pci"])
        self.rx_power[(ue_id, pci)] = float(args["rx_dbm"])
        self.emit("sim", "power_set", {"ue_id": ue_id, "pci": pci,
                                       "rx_dbm": float(args["rx_dbm"])})
        return {}

    def _cmd_add_ue(self, args: dict) -> dict:
        ue_id = int(args["id"])
        if ue_id in self.ues:
            raise CommandError(409, f"ue {ue_id} already exists")
        profile = profile_from_json(args["profile"].get("name", "custom"), args["profile"])
        ue = Ue(self, ue_id, imsi=args["imsi"], profile=profile,
                wants_data=bool(args.get("wants_data", True)),
                locked=bool(args.get("locked", False)))
        self.ues[ue_id] = ue
        self.emit(ue.entity, "ue_added", {
            "ue_id": ue_id, "imsi": ue.imsi, "profile": profile.name,
            "hplmn": profile.hplmn, "wants_data": ue.wants_data})
        ue.start_scan(self.now)
        self._schedule_ue_tick(ue_id, self.now)
        return {"ue_id": ue_id}

    def _cmd_add_subscriber(self, args: dict) -> dict:
        entry = SubscriberEntry(imsi=args["imsi"], display_name=args["display_name"],
                                hplmn=args.get("hplmn", "001-01"))
        entry.validate()
        if entry.imsi in self.subscribers:
            raise CommandError(409, f"imsi {entry.imsi} already provisioned")
        self.subscribers[entry.imsi] = entry
        self.emit("sim", "subscriber_added", entry.to_json())
        return {"imsi": entry.imsi}

    def _cmd_update_subscriber(self, args: dict) -> dict:
        imsi = args["imsi"]
        if imsi not in self.subscribers:
            raise CommandError(404, f"imsi {imsi} not provisioned")
        old = self.subscribers[imsi]
        entry = SubscriberEntry(imsi=imsi,
                                display_name=args.get("display_name", old.display_name),
                                hplmn=args.get("hplmn", old.hplmn))
        entry.validate()
        self.subscribers[imsi] = entry
        self.emit("sim", "subscriber_updated", entry.to_json())
        return {"imsi": imsi}

    def _cmd_remove_subscriber(self, args: dict) -> dict:
        imsi = args["imsi"]
        if imsi not in self.subscribers:
            raise CommandError(404, f"imsi {imsi} not provisioned")
        del self.subscribers[imsi]
        self.emit("sim", "subscriber_removed", {"imsi": imsi})
        return {}

    def _build_payload(self, args: dict) -> codec.WarningPayload:
        coding_str = args.get("coding", "auto")
        text = args["text"]
        if coding_str == "auto":
            coding = codec.detect_coding(text)
        else:
            coding = codec.Coding(coding_str)
        payload = codec.WarningPayload(
            message_identifier=int(args["message_identifier"]),
            serial_number=int(args["serial_number"]),
            coding=coding, text=text)
        payload.validate()
        return payload

    def _cmd_start_warning(self, args: dict) -> dict:
        pci = int(args["pci"])
        cell = self.cells.get(pci)
        if cell is None:
            raise CommandError(404, f"no cell with pci {pci}")
        payload = self._build_payload(args)
        budget = int(args.get("si_budget") or self.config.si_budget)
        warning = codec.paginate(payload)
        segments = codec.segment(warning, budget)
        wid = self._next_warning_id
        self._next_warning_id += 1
        cell.add_warning(wid, payload, segments, budget)
        self.warning_cell[wid] = pci
        if bool(args.get("with_paging", False)):
            cell.pending_si_modification = True
            cell.pending_etws_indication = True
        self.emit(f"cell:{pci}", "warning_started", {
            "pci": pci, "warning_id": wid,
            "message_identifier": payload.message_identifier,
            "serial_number": payload.serial_number,
            "coding": payload.coding.value,
            "pages": len(warning.pages), "segments": len(segments),
            "with_paging": bool(args.get("with_paging", False)),
            "content_hash": codec.content_hash(warning)})
        return {"warning_id": wid}

    def _cmd_update_warning(self, args: dict) -> dict:
        wid = int(args["warning_id"])
        pci = self.warning_cell.get(wid)
        if pci is None:
            raise CommandError(404, f"no active warning {wid}")
        cell = self.cells[pci]
        state = cell.warnings.get(wid)
        if state is None or state.payload is None:
            raise CommandError(404, f"no active warning {wid}")
        changes = args.get("changes", {})
        merged = {
            "message_identifier": changes.get("message_identifier",
                                              state.payload.message_identifier),
            "serial_number": changes.get("serial_number", state.payload.serial_number),
            "coding": changes.get("coding", state.payload.coding.value),
            "text": changes.get("text", state.payload.text),
        }
        payload = self._build_payload(merged)
        warning = codec.paginate(payload)
        segments = codec.segment(warning, state.si_budget)
        cell.replace_warning(wid, payload, segments, state.si_budget)
        self.emit(f"cell:{pci}", "warning_updated", {
            "pci": pci, "warning_id": wid,
            "message_identifier": payload.message_identifier,
            "serial_number": payload.serial_number,
            "coding": payload.coding.value,
            "pages": len(warning.pages), "segments": len(segments),
            "content_hash": codec.content_hash(warning)})
        return {"warning_id": wid}

    def _cmd_stop_warning(self, args: dict) -> dict:
        wid = int(args["warning_id"])
        pci = self.warning_cell.get(wid)
        if pci is None:
            raise CommandError(404, f"no active warning {wid}")
        self.cells[pci].remove_warning(wid)
        del self.warning_cell[wid]
        self.emit(f"cell:{pci}", "warning_stopped", {"pci": pci, "warning_id": wid})
        return {}

    def _cmd_force_raw_warning(self, args: dict) -> dict:
        """Test hook: broadcast a page-block stream bypassing sender checks."""
        pci = int(args["pci"])
        cell = self.cells.get(pci)
        if cell is None:
            raise CommandError(404, f"no cell with pci {pci}")
        blob = bytes.fromhex(args["blob_hex"])
        budget = int(args.get("si_budget") or self.config.si_budget)
        segments = codec.segment_raw(int(args["message_identifier"]),
                                     int(args["serial_number"]),
                                     int(args["dcs_octet"]), blob, budget)
        wid = self._next_warning_id
        self._next_warning_id += 1
        cell.add_warning(wid, None, segments, budget)
        self.warning_cell[wid] = pci
        self.emit(f"cell:{pci}", "warning_started", {
            "pci": pci, "warning_id": wid,
            "message_identifier": int(args["message_identifier"]),
            "serial_number": int(args["serial_number"]),
            "coding": "raw",
            "pages": len(blob) // codec.PAGE_BLOCK_OCTETS,
            "segments": len(segments),
            "with_paging": False,
            "content_hash": None})
        return {"warning_id": wid}

    def _cmd_jam(self, args: dict) -> dict:
        ue_ids = [int(u) for u in args["ue_ids"]]
        duration = int(args["duration_ms"])
        until = self.now + duration
        affected = []
        for ue_id in ue_ids:
            ue = self.ues.get(ue_id)
            if ue is None:
                raise CommandError(404, f"no ue {ue_id}")
            if ue.serving_pci is None or duration <= 0:
                continue
            self._jams.append({"ue_id": ue_id, "pci": ue.serving_pci, "until_ms": until})
            affected.append({"ue_id": ue_id, "pci": ue.serving_pci})
        self.emit("sim", "jam_started", {"targets": affected, "until_ms": until})
        for item in affected:
            self.ues[item["ue_id"]].lose_serving(self.now, "jammed")
        return {"jammed": affected, "until_ms": until}

    def _cmd_interact(self, args: dict) -> dict:
        ue = self.ues.get(int(args["ue_id"]))
        if ue is None:
            raise CommandError(404, f"no ue {args['ue_id']}")
        trace = ue.interact_with_alert(int(args["alert_index"]), int(args["span_index"]))
        return {"trace": trace}

    # -- snapshots ---------------------------------------------------------

    def cell_snapshot(self, cell: Cell) -> dict:
        cfg = cell.config
        return {
            "pci": cfg.pci, "plmn": cfg.plmn, "tac": cfg.tac,
            "cell_identity": cfg.cell_identity, "carrier": cfg.carrier,
            "is_rogue": cfg.is_rogue, "tx_active": cfg.tx_active,
            "has_core": cfg.has_core, "value_tag": cell.value_tag,
            "dirty": cell.dirty,
            "si_slots_used": len(cell.slots),
            "warnings": {
                str(wid): {
                    "payload": None if st.payload is None else {
                        "message_identifier": st.payload.message_identifier,
                        "serial_number": st.payload.serial_number,
                        "coding": st.payload.coding.value,
                        "text": st.payload.text,
                    },
                    "si_indexes": list(st.si_indexes),
                    "si_budget": st.si_budget,
                    "segments": len(st.segments),
                }
                for wid, st in sorted(cell.warnings.items())
            },
        }

    def snapshot(self) -> dict:
        return {
            "now": self.now,
            "config": self.config.to_json(),
            "policy": self.policy.to_json() if self.policy else None,
            "cells": {str(p): self.cell_snapshot(self.cells[p]) for p in sorted(self.cells)},
            "ues": {str(i): self.ues[i].snapshot() for i in sorted(self.ues)},
            "subscribers": {i: self.subscribers[i].to_json() for i in sorted(self.subscribers)},
            "rx_power": {f"{u}:{p}": v for (u, p), v in sorted(self.rx_power.items())},
        }
