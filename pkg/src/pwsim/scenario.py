"""Scenario files: declarative setup, timeline, and outcome checks.

A scenario is a JSON document describing the radio topology, the device
population, a timeline of operator commands, and a list of expectations
evaluated once the clock reaches run_until.  Loading is strict: unknown
keys and malformed values fail fast with a path to the offending field.

replay_from_log() rebuilds a simulation purely from the command records
of an event log, which is the determinism story in one function: the
rebuilt run emits the same events and ends in the same state.
"""

from __future__ import annotations

import json
from pathlib import Path

from .events import parse_log_line
from .sim import SimConfig, Simulation
from .ue import BUILTIN_PROFILES
from .verify import VerificationPolicy


class BadScenario(Exception):
    """A scenario document failed validation."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


# -- field validation shared by the scenario loader and the HTTP API ------

TIMELINE_OPS = frozenset({
    "add_cell", "update_cell", "set_power", "add_ue",
    "add_subscriber", "update_subscriber", "remove_subscriber",
    "start_warning", "update_warning", "stop_warning",
    "force_raw_warning", "jam", "interact",
})


def _require(mapping: dict, key: str, kind, path: str):
    if key not in mapping:
        raise BadScenario(path, f"missing required key {key!r}")
    value = mapping[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise BadScenario(f"{path}.{key}", "must be a number")
        return float(value)
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise BadScenario(f"{path}.{key}", "must be an integer")
    if not isinstance(value, kind):
        raise BadScenario(f"{path}.{key}", f"must be {kind.__name__}")
    return value


def _reject_unknown(mapping: dict, allowed: set, path: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise BadScenario(path, f"unknown keys: {sorted(unknown)}")


def validate_cell_args(args: dict, path: str = "cell") -> dict:
    _reject_unknown(args, {"pci", "plmn", "tac", "cell_identity", "carrier",
                           "is_rogue", "tx_active", "has_core"}, path)
    _require(args, "pci", int, path)
    _require(args, "plmn", str, path)
    return args


def validate_ue_args(args: dict, path: str = "ue") -> dict:
    _reject_unknown(args, {"id", "imsi", "profile", "overrides", "wants_data",
                           "locked", "power"}, path)
    _require(args, "id", int, path)
    _require(args, "imsi", str, path)
    chosen = _require(args, "profile", (str, dict), path)
    if isinstance(chosen, str) and chosen not in BUILTIN_PROFILES:
        raise BadScenario(f"{path}.profile",
                          f"unknown profile {chosen!r}; built-ins: {sorted(BUILTIN_PROFILES)}")
    power = args.get("power", {})
    if not isinstance(power, dict):
        raise BadScenario(f"{path}.power", "must be a {pci: rx_dbm} object")
    for key, value in power.items():
        if not key.lstrip("-").isdigit():
            raise BadScenario(f"{path}.power.{key}", "pci keys must be integers")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise BadScenario(f"{path}.power.{key}", "rx_dbm must be a number")
    return args


def validate_warning_args(args: dict, path: str = "warning") -> dict:
    _reject_unknown(args, {"pci", "message_identifier", "serial_number",
                           "coding", "text", "with_paging", "si_budget"}, path)
    _require(args, "pci", int, path)
    _require(args, "message_identifier", int, path)
    _require(args, "serial_number", int, path)
    _require(args, "text", str, path)
    coding = args.get("coding", "auto")
    if coding not in ("auto", "gsm7", "ucs2"):
        raise BadScenario(f"{path}.coding", "must be auto, gsm7 or ucs2")
    return args


def validate_policy_args(args: dict, path: str = "policy") -> dict:
    _reject_unknown(args, {"max_cells_to_scan", "required_matches",
                           "scan_timeout_ms", "carrier_list"}, path)
    for key in ("max_cells_to_scan", "required_matches", "scan_timeout_ms"):
        if key in args:
            _require(args, key, int, path)
    carriers = args.get("carrier_list", [0])
    if not isinstance(carriers, list) or not all(
            isinstance(c, int) and not isinstance(c, bool) for c in carriers):
        raise BadScenario(f"{path}.carrier_list", "must be a list of integers")
    return args


def resolve_profile(chosen, overrides: dict | None, path: str = "ue.profile") -> dict:
    """Expand a profile name or inline dict plus overrides to a full dict."""
    if isinstance(chosen, str):
        base = BUILTIN_PROFILES.get(chosen)
        if base is None:
            raise BadScenario(path, f"unknown profile {chosen!r}")
        data = base.to_json()
    elif isinstance(chosen, dict):
        data = {"name": "custom", **chosen}
    else:
        raise BadScenario(path, "must be a profile name or object")
    if overrides:
        flags = {**data.get("parser_flags", {}), **overrides.pop("parser_flags", {})} \
            if "parser_flags" in overrides else data.get("parser_flags", {})
        data = {**data, **overrides, "parser_flags": flags}
    if "hplmn" not in data:
        raise BadScenario(path, "profile needs hplmn")
    return data


_TOP_KEYS = {"name", "description", "config", "policy", "tlds", "subscribers",
             "cells", "ues", "timeline", "run_until", "expectations"}


def load_scenario(source) -> dict:
    """Parse and validate a scenario from a path, JSON text, or dict."""
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise BadScenario(str(source), f"cannot read: {exc}") from exc
        source = text
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as exc:
            raise BadScenario("$", f"not valid JSON: {exc}") from exc
    if not isinstance(source, dict):
        raise BadScenario("$", "scenario must be a JSON object")
    scn = source
    _reject_unknown(scn, _TOP_KEYS, "$")
    _require(scn, "name", str, "$")
    _require(scn, "run_until", int, "$")
    if scn["run_until"] < 0:
        raise BadScenario("$.run_until", "must be >= 0")

    if "config" in scn:
        try:
            SimConfig.from_json(scn["config"])
        except (TypeError, ValueError) as exc:
            raise BadScenario("$.config", str(exc)) from exc
    if scn.get("policy") is not None:
        validate_policy_args(scn["policy"], "$.policy")
    for i, sub in enumerate(scn.get("subscribers", [])):
        _reject_unknown(sub, {"imsi", "display_name", "hplmn"}, f"$.subscribers[{i}]")
        _require(sub, "imsi", str, f"$.subscribers[{i}]")
        _require(sub, "display_name", str, f"$.subscribers[{i}]")
    for i, cell in enumerate(scn.get("cells", [])):
        validate_cell_args(cell, f"$.cells[{i}]")
    for i, ue in enumerate(scn.get("ues", [])):
        validate_ue_args(ue, f"$.ues[{i}]")
        resolve_profile(ue["profile"], dict(ue.get("overrides", {})), f"$.ues[{i}].profile")
    for i, item in enumerate(scn.get("timeline", [])):
        path = f"$.timeline[{i}]"
        _reject_unknown(item, {"at", "op", "args"}, path)
        at = _require(item, "at", int, path)
        if at < 0:
            raise BadScenario(f"{path}.at", "must be >= 0")
        op = _require(item, "op", str, path)
        if op not in TIMELINE_OPS:
            raise BadScenario(f"{path}.op", f"unknown op {op!r}")
        _require(item, "args", dict, path)
        if op == "start_warning":
            validate_warning_args(item["args"], f"{path}.args")
    for i, exp in enumerate(scn.get("expectations", [])):
        if not isinstance(exp, dict) or "kind" not in exp:
            raise BadScenario(f"$.expectations[{i}]", "must be an object with a kind")
        if exp["kind"] not in _CHECKS:
            raise BadScenario(f"$.expectations[{i}].kind",
                              f"unknown kind {exp['kind']!r}; known: {sorted(_CHECKS)}")
    return scn


# -- building and running -------------------------------------------------

def build_simulation(scn: dict) -> Simulation:
    """Instantiate the topology at t=0.  Every step goes through the
    command path so the log alone can rebuild the run."""
    sim = Simulation()
    sim.apply_now("configure", {
        "config": scn.get("config", {}),
        "policy": scn.get("policy"),
        "tlds": scn.get("tlds"),
    })
    for sub in scn.get("subscribers", []):
        sim.apply_now("add_subscriber", sub)
    for cell in scn.get("cells", []):
        sim.apply_now("add_cell", cell)
    for ue in scn.get("ues", []):
        for pci, rx in sorted(ue.get("power", {}).items(), key=lambda kv: int(kv[0])):
            sim.apply_now("set_power", {"ue_id": ue["id"], "pci": int(pci), "rx_dbm": rx})
    for ue in scn.get("ues", []):
        profile = resolve_profile(ue["profile"], dict(ue.get("overrides", {})))
        sim.apply_now("add_ue", {
            "id": ue["id"], "imsi": ue["imsi"], "profile": profile,
            "wants_data": ue.get("wants_data", True),
            "locked": ue.get("locked", False),
        })
    for item in scn.get("timeline", []):
        sim.submit(item["op"], item["args"], item["at"])
    return sim


def run_scenario(scn: dict) -> tuple[Simulation, dict]:
    sim = build_simulation(scn)
    sim.run(scn["run_until"])
    return sim, evaluate_expectations(sim, scn)


# -- expectations ---------------------------------------------------------

def _match(ev, sel: dict) -> bool:
    if "entity" in sel and ev.entity != sel["entity"]:
        return False
    if "event" in sel and ev.event != sel["event"]:
        return False
    for key, want in sel.get("detail", {}).items():
        if ev.detail.get(key) != want:
            return False
    return True


def _select(sim, sel: dict):
    return [ev for ev in sim.events if _match(ev, sel)]


def _check_alert_count(sim, exp):
    ue = sim.ues[exp["ue"]]
    got = len(ue.alerts)
    return got == exp["equals"], f"ue {exp['ue']} displayed {got} alerts, want {exp['equals']}"


def _check_displayed_serials(sim, exp):
    ue = sim.ues[exp["ue"]]
    got = [a.serial_number for a in ue.alerts]
    return got == exp["equals"], f"ue {exp['ue']} serials {got}, want {exp['equals']}"


def _check_alert_times(sim, exp):
    ue = sim.ues[exp["ue"]]
    got = [a.time_ms for a in ue.alerts]
    return got == exp["equals"], f"ue {exp['ue']} alert times {got}, want {exp['equals']}"


def _check_alert_before_registration(sim, exp):
    entity = f"ue:{exp['ue']}"
    alerts = _select(sim, {"entity": entity, "event": "alert_displayed"})
    if not alerts:
        return False, f"{entity} never displayed an alert"
    attempts = _select(sim, {"entity": entity, "event": "registration_attempt"})
    if not attempts:
        return True, f"{entity} alert at {alerts[0].time_ms}ms, no registration attempt at all"
    ok = alerts[0].seq < attempts[0].seq
    return ok, (f"{entity} alert seq {alerts[0].seq} (t={alerts[0].time_ms}) vs first "
                f"registration attempt seq {attempts[0].seq} (t={attempts[0].time_ms})")


def _check_event_present(sim, exp):
    hits = _select(sim, exp["select"])
    need = exp.get("min_count", 1)
    return len(hits) >= need, f"{len(hits)} events match {exp['select']}, want >= {need}"


def _check_event_absent(sim, exp):
    hits = _select(sim, exp["select"])
    return not hits, f"{len(hits)} events match {exp['select']}, want none"


def _check_event_count(sim, exp):
    hits = _select(sim, exp["select"])
    return len(hits) == exp["equals"], \
        f"{len(hits)} events match {exp['select']}, want {exp['equals']}"


def _check_event_order(sim, exp):
    first = _select(sim, exp["first"])
    then = _select(sim, exp["then"])
    if not first:
        return False, f"no event matches {exp['first']}"
    if not then:
        return False, f"no event matches {exp['then']}"
    ok = first[0].seq < then[0].seq
    return ok, f"seq {first[0].seq} vs {then[0].seq}"


def _check_verdict(sim, exp):
    ue = sim.ues[exp["ue"]]
    idx = exp.get("index", 0)
    if idx >= len(ue.verdicts):
        return False, f"ue {exp['ue']} has {len(ue.verdicts)} verdicts, want index {idx}"
    verdict = ue.verdicts[idx]
    if verdict.status != exp["status"]:
        return False, f"verdict status {verdict.status!r}, want {exp['status']!r}"
    if "reason" in exp and verdict.reason != exp["reason"]:
        return False, f"verdict reason {verdict.reason!r}, want {exp['reason']!r}"
    return True, f"verdict {verdict.status}({verdict.reason})"


def _check_ue_state(sim, exp):
    ue = sim.ues[exp["ue"]]
    if "rrc" in exp and ue.rrc.value != exp["rrc"]:
        return False, f"ue {exp['ue']} rrc {ue.rrc.value}, want {exp['rrc']}"
    if "serving_pci" in exp and ue.serving_pci != exp["serving_pci"]:
        return False, f"ue {exp['ue']} serving {ue.serving_pci}, want {exp['serving_pci']}"
    if "camped_class" in exp:
        got = ue.camped_class.value if ue.camped_class else None
        if got != exp["camped_class"]:
            return False, f"ue {exp['ue']} camped_class {got}, want {exp['camped_class']}"
    return True, "state matches"


def _check_barred_contains(sim, exp):
    ue = sim.ues[exp["ue"]]
    ok = exp["pci"] in ue.barred
    return ok, f"ue {exp['ue']} barred set {sorted(ue.barred)}, want {exp['pci']} in it"


_CHECKS = {
    "alert_count": _check_alert_count,
    "displayed_serials": _check_displayed_serials,
    "alert_times": _check_alert_times,
    "alert_before_registration": _check_alert_before_registration,
    "event_present": _check_event_present,
    "event_absent": _check_event_absent,
    "event_count": _check_event_count,
    "event_order": _check_event_order,
    "verdict": _check_verdict,
    "ue_state": _check_ue_state,
    "barred_contains": _check_barred_contains,
}


def evaluate_expectations(sim: Simulation, scn: dict) -> dict:
    checks = []
    for exp in scn.get("expectations", []):
        try:
            ok, message = _CHECKS[exp["kind"]](sim, exp)
        except KeyError as exc:
            ok, message = False, f"missing {exc} while evaluating"
        checks.append({"kind": exp["kind"], "ok": ok, "message": message})
    return {
        "name": scn["name"],
        "now": sim.now,
        "events": len(sim.events),
        "passed": all(c["ok"] for c in checks),
        "checks": checks,
    }


# -- replay ---------------------------------------------------------------

def replay_from_log(text: str) -> Simulation:
    """Rebuild a run from its event log.

    Only command records drive state; everything else re-emerges from the
    deterministic loop.  Rejected commands are resubmitted too so their
    rejection records reappear at the same position.
    """
    events = [parse_log_line(line) for line in text.splitlines() if line.strip()]
    sim = Simulation()
    horizon = 0
    for ev in events:
        horizon = max(horizon, ev.time_ms)
        if ev.event == "clock":
            horizon = max(horizon, ev.detail["until_ms"])
        if ev.event in ("command_accepted", "command_rejected"):
            sim.submit(ev.detail["op"], ev.detail["args"], ev.time_ms)
    sim.run(horizon)
    return sim
