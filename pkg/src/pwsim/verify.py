"""Cross-cell warning verification.

After a warning displays, the device keeps its serving camp and uses a
second receive chain to read the same warning off neighbor cells, purely
passively.  Each candidate costs the real simulated wait for that cell's
SIB1 and warning SI occasions.  A warning confirmed on enough distinct
cells is Verified; a single-source warning stays Unverified with the
reason recorded.  Network choice is irrelevant on purpose: warnings are
broadcast by every operator, so any carrier's cells can confirm.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import codec
from .radio import Sib1Info, SiBroadcast


@dataclass(frozen=True)
class VerificationPolicy:
    max_cells_to_scan: int = 4
    required_matches: int = 2
    scan_timeout_ms: int = 20000
    carrier_list: tuple[int, ...] = (0,)

    def validate(self) -> None:
        if self.max_cells_to_scan < 1:
            raise ValueError("max_cells_to_scan must be >= 1")
        if not (1 <= self.required_matches <= self.max_cells_to_scan):
            raise ValueError("required_matches must be in 1..max_cells_to_scan")
        if self.scan_timeout_ms <= 0:
            raise ValueError("scan_timeout_ms must be positive")
        if not self.carrier_list:
            raise ValueError("carrier_list must not be empty")

    def to_json(self) -> dict:
        return {
            "max_cells_to_scan": self.max_cells_to_scan,
            "required_matches": self.required_matches,
            "scan_timeout_ms": self.scan_timeout_ms,
            "carrier_list": list(self.carrier_list),
        }


@dataclass(frozen=True)
class VerificationVerdict:
    status: str                    # Verified | Unverified
    reason: str                    # EnoughMatches | NoNeighbors | ScanExhausted | Timeout
    content_hash: str
    origin_pci: int
    matching_pcis: tuple[int, ...]
    scanned_pcis: tuple[int, ...]
    started_ms: int
    concluded_ms: int

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "content_hash": self.content_hash,
            "origin_pci": self.origin_pci,
            "matching_pcis": list(self.matching_pcis),
            "scanned_pcis": list(self.scanned_pcis),
            "started_ms": self.started_ms,
            "concluded_ms": self.concluded_ms,
        }


class AlreadyVerifying(Exception):
    pass


class VerificationSession:
    """Passive neighbor scan bound to one displayed warning."""

    def __init__(self, sim, ue, content_hash: str, origin_pci: int,
                 policy: VerificationPolicy, now: int):
        policy.validate()
        self.sim = sim
        self.ue = ue
        self.target_hash = content_hash
        self.origin_pci = origin_pci
        self.policy = policy
        self.started_ms = now
        self.scanned: list[int] = []
        self.matching: list[int] = []
        self.saw_candidate = False
        self.active = True
        self.current_pci: int | None = None
        self.awaiting_sib1 = False
        self.pending_si: set[int] = set()
        self.buffers: dict[tuple[int, int], list[codec.Sib8Segment]] = {}
        self.ue.emit("verification_started", {
            "content_hash": content_hash,
            "origin_pci": origin_pci,
            "policy": policy.to_json(),
        })
        # bind before advancing: the first step may already conclude
        ue.session = self
        self.sim.schedule_timer(now + policy.scan_timeout_ms, ue.ue_id, 5,
                                lambda t: self.on_timeout(t))
        self.advance(now)

    # -- candidate management ---------------------------------------------

    def _next_candidate(self, now: int) -> int | None:
        order = {c: i for i, c in enumerate(self.policy.carrier_list)}
        best = None
        for cell, rx in self.sim.visible_cells(self.ue.ue_id, now):
            pci = cell.config.pci
            if pci == self.origin_pci or pci in self.scanned:
                continue
            if cell.config.carrier not in order:
                continue
            key = (order[cell.config.carrier], -rx, pci)
            if best is None or key < best[0]:
                best = (key, pci)
        if best is not None:
            self.saw_candidate = True
            return best[1]
        return None

    def advance(self, now: int) -> None:
        if not self.active:
            return
        if len(self.matching) >= self.policy.required_matches:
            self._conclude(now, "Verified", "EnoughMatches")
            return
        if len(self.scanned) >= self.policy.max_cells_to_scan:
            self._conclude(now, "Unverified", "ScanExhausted")
            return
        pci = self._next_candidate(now)
        if pci is None:
            if not self.saw_candidate:
                self._conclude(now, "Unverified", "NoNeighbors")
            else:
                self._conclude(now, "Unverified", "ScanExhausted")
            return
        self.current_pci = pci
        self.awaiting_sib1 = True
        self.pending_si = set()
        self.buffers = {}
        self.ue.emit("verification_scan", {"pci": pci})

    # -- broadcast ingestion (routed by the owning UE) ---------------------

    def on_sib1(self, now: int, sib1: Sib1Info) -> None:
        if not (self.active and self.awaiting_sib1 and sib1.pci == self.current_pci):
            return
        self.awaiting_sib1 = False
        self.pending_si = {e.si_index for e in sib1.scheduling if e.contains_sib8}
        if not self.pending_si:
            self._finish_candidate(now, matched=False)

    def on_si(self, now: int, broadcast: SiBroadcast) -> None:
        if not (self.active and not self.awaiting_sib1 and broadcast.pci == self.current_pci):
            return
        if broadcast.si_index not in self.pending_si:
            return
        self.pending_si.discard(broadcast.si_index)
        try:
            seg = codec.parse_frame(broadcast.body)
            key = (seg.message_identifier, seg.serial_number)
            self.buffers.setdefault(key, []).append(seg)
        except codec.CodecError:
            pass
        if not self.pending_si:
            self._evaluate_candidate(now)

    def _evaluate_candidate(self, now: int) -> None:
        matched = False
        for segs in self.buffers.values():
            try:
                warning = codec.reassemble(segs)
            except (codec.CodecError, ValueError):
                continue
            if codec.content_hash(warning) == self.target_hash:
                matched = True
                break
        self._finish_candidate(now, matched)

    def _finish_candidate(self, now: int, matched: bool) -> None:
        pci = self.current_pci
        self.scanned.append(pci)
        if matched:
            self.matching.append(pci)
        self.current_pci = None
        self.ue.emit("verification_scan_result", {"pci": pci, "match": matched})
        self.advance(now)

    # -- conclusion --------------------------------------------------------

    def on_timeout(self, now: int) -> None:
        if not self.active:
            return
        self._conclude(now, "Unverified", "Timeout")

    def _conclude(self, now: int, status: str, reason: str) -> None:
        self.active = False
        verdict = VerificationVerdict(
            status=status,
            reason=reason,
            content_hash=self.target_hash,
            origin_pci=self.origin_pci,
            matching_pcis=tuple(self.matching),
            scanned_pcis=tuple(self.scanned),
            started_ms=self.started_ms,
            concluded_ms=now,
        )
        self.ue.emit("verification_verdict", verdict.to_json())
        self.ue.on_verification_done(verdict)


def begin_verification(sim, ue, content_hash: str, origin_pci: int,
                       policy: VerificationPolicy) -> VerificationSession:
    """Start a session on a UE; only one may run at a time."""
    if ue.session is not None and ue.session.active:
        raise AlreadyVerifying(f"ue {ue.ue_id} already has a verification in progress")
    return VerificationSession(sim, ue, content_hash, origin_pci, policy, sim.now)
