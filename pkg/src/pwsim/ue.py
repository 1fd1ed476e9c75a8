"""Receiver state machine.

A UE scans, camps on the best cell it may use, reads the serving cell's
SIB1, acquires every warning-bearing SI message once per modification
window, reassembles and displays warnings, then tries to register if it
wants data service.  Warning display needs no registration and no
authentication; that asymmetry is what a spoofed cell exploits.

Per-device quirks live in UeProfile: segmentation support, whether
parallel warnings all display or only the last completed one, how many
reassemblies run at once, and whether homoglyph URLs stay tappable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources

from . import codec
from .linkify import ParserProfileFlags, SpanKind, parse_content, spans_to_json
from .radio import Sib1Info, SiBroadcast


class UeError(Exception):
    pass


class NoCellAvailable(UeError):
    pass


class InvalidSpan(UeError):
    pass


class Rrc(Enum):
    SCANNING = "Scanning"
    CAMPED_IDLE = "CampedIdle"
    CONNECTING_ATTEMPT = "ConnectingAttempt"
    CONNECTED = "Connected"


class CampedClass(Enum):
    SUITABLE = "Suitable"
    ACCEPTABLE = "Acceptable"


class MultiWarningDisplay(Enum):
    ALL = "All"
    LAST_ONLY = "LastOnly"


@dataclass(frozen=True)
class UeProfile:
    name: str
    hplmn: str
    supports_segmentation: bool = True
    multi_warning_display: MultiWarningDisplay = MultiWarningDisplay.ALL
    max_parallel_reassemblies: int = 1
    parser_flags: ParserProfileFlags = field(default_factory=ParserProfileFlags)
    registration_retries: int = 3

    def __post_init__(self):
        if self.max_parallel_reassemblies < 1:
            raise ValueError("max_parallel_reassemblies must be >= 1")
        if self.registration_retries < 1:
            raise ValueError("registration_retries must be >= 1")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "hplmn": self.hplmn,
            "supports_segmentation": self.supports_segmentation,
            "multi_warning_display": self.multi_warning_display.value,
            "max_parallel_reassemblies": self.max_parallel_reassemblies,
            "parser_flags": {"cyrillic_url_clickable": self.parser_flags.cyrillic_url_clickable},
            "registration_retries": self.registration_retries,
        }


def profile_from_json(name: str, data: dict) -> UeProfile:
    return UeProfile(
        name=name,
        hplmn=data["hplmn"],
        supports_segmentation=bool(data.get("supports_segmentation", True)),
        multi_warning_display=MultiWarningDisplay(data.get("multi_warning_display", "All")),
        max_parallel_reassemblies=int(data.get("max_parallel_reassemblies", 1)),
        parser_flags=ParserProfileFlags(
            cyrillic_url_clickable=bool(data.get("parser_flags", {}).get("cyrillic_url_clickable", False))),
        registration_retries=int(data.get("registration_retries", 3)),
    )


def _load_builtin_profiles() -> dict[str, UeProfile]:
    raw = json.loads(resources.files("pwsim").joinpath("data/profiles.json").read_text(encoding="utf-8"))
    return {name: profile_from_json(name, data) for name, data in raw.items()}


BUILTIN_PROFILES = _load_builtin_profiles()


def select_cell(visible: list[tuple[int, str, float]], hplmn: str,
                allow_acceptable: bool, barred: set[int]) -> tuple[int, CampedClass]:
    """Pick a camping target from (pci, plmn, rx_dbm) triples.

    Home-network cells always win; any-network fallback applies only once
    the caller has waited out the fallback delay.  Ties break to the
    lowest pci.  Raises NoCellAvailable when nothing is eligible.
    """
    usable = [(pci, plmn, rx) for pci, plmn, rx in visible if pci not in barred]
    suitable = [c for c in usable if c[1] == hplmn]
    pool = suitable if suitable else (usable if allow_acceptable else [])
    if not pool:
        raise NoCellAvailable("no eligible cell in range")
    best = min(pool, key=lambda c: (-c[2], c[0]))
    return best[0], (CampedClass.SUITABLE if suitable else CampedClass.ACCEPTABLE)


@dataclass
class Alert:
    time_ms: int
    message_identifier: int
    serial_number: int
    text: str
    spans: list
    pci: int
    content_hash: str

    def to_json(self) -> dict:
        return {
            "time_ms": self.time_ms,
            "message_identifier": self.message_identifier,
            "serial_number": self.serial_number,
            "text": self.text,
            "spans": spans_to_json(self.spans),
            "pci": self.pci,
            "content_hash": self.content_hash,
        }


# which handler opens each span kind on tap
TARGET_APP = {
    SpanKind.WEB_URL: "browser",
    SpanKind.EMAIL: "mail",
    SpanKind.PHONE: "dialer",
    SpanKind.MAP_ADDRESS: "maps",
}


class Ue:
    """One simulated device.  Driven entirely by the simulation loop."""

    def __init__(self, sim, ue_id: int, imsi: str, profile: UeProfile,
                 wants_data: bool = True, locked: bool = False):
        self.sim = sim
        self.ue_id = ue_id
        self.imsi = imsi
        self.profile = profile
        self.wants_data = wants_data
        self.locked = locked

        self.rrc = Rrc.SCANNING
        self.serving_pci: int | None = None
        self.camped_class: CampedClass | None = None
        self.known_sib1: dict[int, Sib1Info] = {}
        self.barred: dict[int, int] = {}          # pci -> barred until ms

        self.last_value_tag: int | None = None
        self.pending_acq: set[int] = set()
        self.window_completed: list[Alert] = []

        self.buffers: dict[tuple[int, int], list[codec.Sib8Segment]] = {}
        self.rejected_keys: set[tuple[int, int]] = set()
        self.displayed_keys: set[tuple[int, int]] = set()
        self.alerts: list[Alert] = []

        self.scan_started_ms = 0
        self.fallback_generation = 0              # invalidates stale fallback timers
        self.reg_attempts = 0
        self.reg_timer_generation = 0
        self.reg_scheduled = False

        self.session = None                       # active verification session
        self.verdicts: list = []

    # -- identity helpers -------------------------------------------------

    @property
    def entity(self) -> str:
        return f"ue:{self.ue_id}"

    def emit(self, event: str, detail: dict) -> None:
        self.sim.emit(self.entity, event, detail)

    # -- scanning and camping ---------------------------------------------

    def start_scan(self, now: int) -> None:
        self.rrc = Rrc.SCANNING
        self.serving_pci = None
        self.camped_class = None
        self.last_value_tag = None
        self.pending_acq.clear()
        self.window_completed.clear()
        self.reg_scheduled = False
        self.reg_attempts = 0
        self.reg_timer_generation += 1
        self.scan_started_ms = now
        self.fallback_generation += 1
        gen = self.fallback_generation
        self.emit("cell_search", {})
        delay = self.sim.config.acceptable_fallback_delay_ms
        self.sim.schedule_timer(now + delay, self.ue_id, 2,
                                lambda t: self.on_fallback_timer(t, gen))

    def _visible_with_plmn(self, now: int) -> list[tuple[int, str, float]]:
        out = []
        for cell, rx in self.sim.visible_cells(self.ue_id, now):
            sib1 = self.known_sib1.get(cell.config.pci)
            if sib1 is not None:
                out.append((cell.config.pci, sib1.plmn, rx))
        return out

    def _active_barred(self, now: int) -> set[int]:
        expired = [p for p, until in self.barred.items() if now >= until]
        for p in expired:
            del self.barred[p]
        return set(self.barred)

    def try_select(self, now: int, allow_acceptable: bool) -> bool:
        try:
            pci, cls = select_cell(self._visible_with_plmn(now), self.profile.hplmn,
                                   allow_acceptable, self._active_barred(now))
        except NoCellAvailable:
            return False
        self.camp(now, pci, cls)
        return True

    def camp(self, now: int, pci: int, cls: CampedClass, reselected_from: int | None = None) -> None:
        self.fallback_generation += 1
        self.rrc = Rrc.CAMPED_IDLE
        self.serving_pci = pci
        self.camped_class = cls
        self.reg_attempts = 0
        self.reg_scheduled = False
        self.reg_timer_generation += 1
        detail = {"pci": pci, "camped_class": cls.value}
        if reselected_from is not None:
            detail["reselected_from"] = reselected_from
        self.emit("cell_camped", detail)
        sib1 = self.known_sib1.get(pci)
        if sib1 is not None:
            self._open_window(now, sib1)

    def on_fallback_timer(self, now: int, generation: int) -> None:
        if generation != self.fallback_generation or self.rrc is not Rrc.SCANNING:
            return
        self.try_select(now, allow_acceptable=True)

    def on_tick(self, now: int) -> None:
        """Periodic measurement and (re)selection evaluation."""
        if self.rrc is Rrc.SCANNING:
            allow = now >= self.scan_started_ms + self.sim.config.acceptable_fallback_delay_ms
            self.try_select(now, allow_acceptable=allow)
            return
        serving = self.serving_pci
        rx_map = {cell.config.pci: (cell, rx) for cell, rx in self.sim.visible_cells(self.ue_id, now)}
        if serving not in rx_map:
            self.lose_serving(now, "coverage_lost")
            return
        if self.rrc in (Rrc.CONNECTED, Rrc.CONNECTING_ATTEMPT):
            return
        # idle reselection: home network first, then power with hysteresis
        serving_rx = rx_map[serving][1]
        candidates = [(pci, self.known_sib1[pci].plmn, rx) for pci, (cell, rx) in rx_map.items()
                      if pci in self.known_sib1]
        barred = self._active_barred(now)
        if self.camped_class is CampedClass.ACCEPTABLE:
            suitable = [(pci, plmn, rx) for pci, plmn, rx in candidates
                        if plmn == self.profile.hplmn and pci not in barred]
            if suitable:
                best = min(suitable, key=lambda c: (-c[2], c[0]))
                self.camp(now, best[0], CampedClass.SUITABLE, reselected_from=serving)
                return
        hysteresis = self.sim.config.reselection_hysteresis_db
        same_class = [
            (pci, plmn, rx) for pci, plmn, rx in candidates
            if pci != serving and pci not in barred and
            (plmn == self.profile.hplmn if self.camped_class is CampedClass.SUITABLE else True)
        ]
        better = [c for c in same_class if c[2] >= serving_rx + hysteresis]
        if better:
            best = min(better, key=lambda c: (-c[2], c[0]))
            self.camp(now, best[0], self.camped_class, reselected_from=serving)

    def lose_serving(self, now: int, reason: str) -> None:
        if self.rrc is Rrc.CONNECTED:
            self.emit("connection_lost", {"pci": self.serving_pci, "reason": reason})
        self.start_scan(now)

    # -- system information -----------------------------------------------

    def on_sib1(self, now: int, sib1: Sib1Info) -> None:
        self.known_sib1[sib1.pci] = sib1
        if self.session is not None:
            self.session.on_sib1(now, sib1)
        if sib1.pci != self.serving_pci or self.rrc is Rrc.SCANNING:
            return
        if self.last_value_tag is None or sib1.value_tag != self.last_value_tag:
            self._open_window(now, sib1)

    def _open_window(self, now: int, sib1: Sib1Info) -> None:
        """New SIB1 modification window: flush, then schedule acquisitions."""
        self._flush_window()
        self.last_value_tag = sib1.value_tag
        self.pending_acq = {e.si_index for e in sib1.scheduling if e.contains_sib8}
        if not self.pending_acq:
            self._window_done(now)

    def _flush_window(self) -> None:
        if self.profile.multi_warning_display is MultiWarningDisplay.LAST_ONLY and self.window_completed:
            self._display(self.window_completed[-1])
        self.window_completed = []

    def on_si(self, now: int, broadcast: SiBroadcast) -> None:
        if self.session is not None:
            self.session.on_si(now, broadcast)
        if broadcast.pci != self.serving_pci or self.rrc is Rrc.SCANNING:
            return
        if broadcast.si_index not in self.pending_acq:
            return
        self.pending_acq.discard(broadcast.si_index)
        self._ingest_segment(now, broadcast)
        if not self.pending_acq:
            self._window_done(now)

    def on_paging(self, now: int, paging) -> None:
        if paging.pci == self.serving_pci and self.rrc is not Rrc.SCANNING:
            self.emit("paging_received", {
                "pci": paging.pci,
                "si_modification": paging.si_modification,
                "etws_cmas_indication": paging.etws_cmas_indication,
            })

    # -- reassembly and display -------------------------------------------

    def _ingest_segment(self, now: int, broadcast: SiBroadcast) -> None:
        try:
            seg = codec.parse_frame(broadcast.body)
        except codec.CodecError as exc:
            self.emit("segment_rejected", {"pci": broadcast.pci, "si_index": broadcast.si_index,
                                           "reason": str(exc)})
            return
        key = (seg.message_identifier, seg.serial_number)
        if key in self.displayed_keys or key in self.rejected_keys:
            return
        multi = seg.segment_number > 0 or not seg.is_last
        if multi and not self.profile.supports_segmentation:
            self.buffers.pop(key, None)
            self.rejected_keys.add(key)
            self.emit("reassembly_discarded", {
                "message_identifier": key[0], "serial_number": key[1],
                "reason": "segmentation_unsupported"})
            return
        buf = self.buffers.get(key)
        if buf is None:
            if len(self.buffers) >= self.profile.max_parallel_reassemblies:
                self.emit("segment_dropped", {
                    "message_identifier": key[0], "serial_number": key[1],
                    "segment_number": seg.segment_number, "reason": "parallel_limit"})
                return
            buf = self.buffers[key] = []
        buf.append(seg)
        try:
            warning = codec.reassemble(buf)
        except codec.Incomplete:
            return
        except (codec.CodecError, ValueError) as exc:
            del self.buffers[key]
            self.rejected_keys.add(key)
            reason = "too_many_pages" if "page count" in str(exc) else str(exc)
            self.emit("reassembly_discarded", {
                "message_identifier": key[0], "serial_number": key[1], "reason": reason})
            return
        del self.buffers[key]
        try:
            text = codec.decode_text(warning)
        except codec.CodecError as exc:
            self.rejected_keys.add(key)
            self.emit("reassembly_discarded", {
                "message_identifier": key[0], "serial_number": key[1], "reason": str(exc)})
            return
        spans = parse_content(text, self.profile.parser_flags, self.sim.tlds)
        alert = Alert(time_ms=now, message_identifier=key[0], serial_number=key[1],
                      text=text, spans=spans, pci=broadcast.pci,
                      content_hash=codec.content_hash(warning))
        if self.profile.multi_warning_display is MultiWarningDisplay.LAST_ONLY:
            self.window_completed.append(alert)
        else:
            self._display(alert)

    def _display(self, alert: Alert) -> None:
        key = (alert.message_identifier, alert.serial_number)
        if key in self.displayed_keys:
            return
        self.displayed_keys.add(key)
        self.alerts.append(alert)
        self.emit("alert_displayed", {
            "message_identifier": alert.message_identifier,
            "serial_number": alert.serial_number,
            "pci": alert.pci,
            "text": alert.text,
            "spans": spans_to_json(alert.spans),
            "content_hash": alert.content_hash,
        })
        self.sim.on_alert_displayed(self, alert)

    # -- registration ------------------------------------------------------

    def _window_done(self, now: int) -> None:
        """All SI acquisitions of the current window are in."""
        self._flush_window()
        self.maybe_start_registration(now)

    def maybe_start_registration(self, now: int) -> None:
        if not self.wants_data or self.reg_scheduled:
            return
        if self.rrc is not Rrc.CAMPED_IDLE or self.pending_acq:
            return
        if self.session is not None:
            return                      # stay passive while verifying
        self.reg_scheduled = True
        self.reg_timer_generation += 1
        gen = self.reg_timer_generation
        self.sim.schedule_timer(now + self.sim.config.rach_delay_ms, self.ue_id, 3,
                                lambda t: self.on_registration_timer(t, gen))

    def on_registration_timer(self, now: int, generation: int) -> None:
        if generation != self.reg_timer_generation:
            return
        if self.rrc not in (Rrc.CAMPED_IDLE, Rrc.CONNECTING_ATTEMPT) or self.serving_pci is None:
            return
        self.rrc = Rrc.CONNECTING_ATTEMPT
        self.reg_attempts += 1
        pci = self.serving_pci
        self.emit("registration_attempt", {"pci": pci, "attempt": self.reg_attempts})
        if self.sim.cell_accepts_registration(pci, self.imsi):
            self.rrc = Rrc.CONNECTED
            self.emit("registration_success", {"pci": pci})
            return
        self.emit("registration_failed", {"pci": pci, "attempt": self.reg_attempts})
        if self.reg_attempts >= self.profile.registration_retries:
            until = now + self.sim.config.cell_bar_ms
            self.barred[pci] = until
            self.emit("cell_barred", {"pci": pci, "until_ms": until})
            self.start_scan(now)
            return
        gen = self.reg_timer_generation
        self.sim.schedule_timer(now + self.sim.config.registration_retry_interval_ms,
                                self.ue_id, 3, lambda t: self.on_registration_timer(t, gen))

    # -- verification ------------------------------------------------------

    def on_verification_done(self, verdict) -> None:
        self.verdicts.append(verdict)
        self.session = None
        self.maybe_start_registration(self.sim.now)

    # -- interaction -------------------------------------------------------

    def interact_with_alert(self, alert_index: int, span_index: int) -> list[dict]:
        """Tap a span.  Unlock first when locked; never an extra confirmation."""
        if not (0 <= alert_index < len(self.alerts)):
            raise InvalidSpan(f"no alert at index {alert_index}")
        alert = self.alerts[alert_index]
        if not (0 <= span_index < len(alert.spans)):
            raise InvalidSpan(f"alert has no span at index {span_index}")
        span = alert.spans[span_index]
        trace: list[dict] = []
        if self.locked:
            trace.append({"step": "UnlockPrompt"})
            trace.append({"step": "Unlocked"})
        trace.append({
            "step": "OpenTarget",
            "kind": span.kind.value,
            "app": TARGET_APP[span.kind],
            "target": alert.text[span.start:span.end],
        })
        self.emit("alert_interaction", {
            "alert_index": alert_index, "span_index": span_index, "trace": trace})
        return trace

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "imsi": self.imsi,
            "profile": self.profile.name,
            "wants_data": self.wants_data,
            "locked": self.locked,
            "rrc": self.rrc.value,
            "serving_pci": self.serving_pci,
            "camped_class": self.camped_class.value if self.camped_class else None,
            "displayed": sorted(self.displayed_keys),
            "alerts": [a.to_json() for a in self.alerts],
            "barred": {str(p): t for p, t in sorted(self.barred.items())},
            "verdicts": [v.to_json() for v in self.verdicts],
        }
