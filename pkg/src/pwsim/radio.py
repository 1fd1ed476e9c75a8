"""Broadcast side: cell configuration, SI scheduling and warning state.

A cell owns up to 32 SI scheduling slots.  Each active warning occupies
one slot per transport segment.  The SIB1 value tag is bumped lazily at
the next SIB1 emission after any scheduling or content change, so a
burst of changes between two emissions counts as one modification.

Structures handed to receivers (Sib1Info, SiBroadcast, PagingMessage)
deliberately omit the rogue flag and the subscriber-store flag; over the
air a spoofed cell is indistinguishable from a genuine one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import codec

MAX_SI_MESSAGES = 32

PLMN_RE = re.compile(r"^[0-9]{3}-[0-9]{2,3}$")


class RadioError(Exception):
    pass


class DuplicatePci(RadioError):
    pass


class TooManySiMessages(RadioError):
    pass


class UnknownWarning(RadioError):
    pass


@dataclass
class CellConfig:
    pci: int
    plmn: str
    tac: int
    cell_identity: int
    carrier: int = 0
    is_rogue: bool = False
    tx_active: bool = True
    has_core: bool = False

    def validate(self) -> None:
        if not (0 <= self.pci <= 1007):
            raise ValueError("pci out of range 0..1007")
        if not PLMN_RE.match(self.plmn):
            raise ValueError("plmn must look like MCC-MNC, e.g. 001-01")
        if self.tac < 0 or self.cell_identity < 0 or self.carrier < 0:
            raise ValueError("tac, cell_identity and carrier must be non-negative")


@dataclass(frozen=True)
class SiEntry:
    si_index: int
    period_ms: int
    contains_sib8: bool


@dataclass(frozen=True)
class Sib1Info:
    pci: int
    plmn: str
    tac: int
    cell_identity: int
    value_tag: int
    scheduling: tuple[SiEntry, ...]


@dataclass(frozen=True)
class SiBroadcast:
    pci: int
    si_index: int
    body: bytes


@dataclass(frozen=True)
class PagingMessage:
    pci: int
    si_modification: bool
    etws_cmas_indication: bool

    def __post_init__(self):
        if not (self.si_modification or self.etws_cmas_indication):
            raise ValueError("a paging message must set at least one flag")


@dataclass
class WarningState:
    warning_id: int
    payload: codec.WarningPayload | None   # None for raw test streams
    si_budget: int
    segments: list[codec.Sib8Segment]
    si_indexes: list[int]                  # slot k carries segments[k]


@dataclass
class Cell:
    config: CellConfig
    si_period_ms: int
    warnings: dict[int, WarningState] = field(default_factory=dict)
    slots: dict[int, tuple[int, int]] = field(default_factory=dict)  # si_index -> (wid, seg pos)
    value_tag: int = 0
    dirty: bool = False
    pending_si_modification: bool = False
    pending_etws_indication: bool = False

    def mark_dirty(self) -> None:
        self.dirty = True

    def sib1(self) -> Sib1Info:
        """Current SIB1 content.  Applies any pending value tag bump."""
        if self.dirty:
            self.value_tag = (self.value_tag + 1) % 32
            self.dirty = False
        sched = tuple(
            SiEntry(si_index=i, period_ms=self.si_period_ms, contains_sib8=True)
            for i in sorted(self.slots)
        )
        return Sib1Info(
            pci=self.config.pci,
            plmn=self.config.plmn,
            tac=self.config.tac,
            cell_identity=self.config.cell_identity,
            value_tag=self.value_tag,
            scheduling=sched,
        )

    def free_slot_count(self) -> int:
        return MAX_SI_MESSAGES - len(self.slots)

    def _alloc_slots(self, n: int) -> list[int]:
        free = [i for i in range(MAX_SI_MESSAGES) if i not in self.slots]
        if len(free) < n:
            raise TooManySiMessages(
                f"cell {self.config.pci} needs {n} SI slots, only {len(free)} of "
                f"{MAX_SI_MESSAGES} are free")
        return free[:n]

    def add_warning(self, warning_id: int, payload: codec.WarningPayload | None,
                    segments: list[codec.Sib8Segment], si_budget: int) -> WarningState:
        for seg in segments:
            body = codec.frame_segment(seg)
            if len(body) > codec.DEFAULT_SI_BUDGET:
                raise ValueError("framed segment exceeds the SI body limit")
        indexes = self._alloc_slots(len(segments))
        state = WarningState(warning_id=warning_id, payload=payload,
                             si_budget=si_budget, segments=segments,
                             si_indexes=indexes)
        self.warnings[warning_id] = state
        for pos, idx in enumerate(indexes):
            self.slots[idx] = (warning_id, pos)
        self.mark_dirty()
        return state

    def replace_warning(self, warning_id: int, payload: codec.WarningPayload,
                        segments: list[codec.Sib8Segment], si_budget: int) -> WarningState:
        state = self.warnings.get(warning_id)
        if state is None:
            raise UnknownWarning(f"no active warning {warning_id} on cell {self.config.pci}")
        extra = len(segments) - len(state.si_indexes)
        if extra > 0 and self.free_slot_count() < extra:
            raise TooManySiMessages(
                f"update needs {extra} extra SI slots on cell {self.config.pci}")
        for idx in state.si_indexes:
            del self.slots[idx]
        state.si_indexes = self._alloc_slots(len(segments))
        state.payload = payload
        state.segments = segments
        state.si_budget = si_budget
        for pos, idx in enumerate(state.si_indexes):
            self.slots[idx] = (warning_id, pos)
        self.mark_dirty()
        self.pending_si_modification = True
        return state

    def remove_warning(self, warning_id: int) -> WarningState:
        state = self.warnings.pop(warning_id, None)
        if state is None:
            raise UnknownWarning(f"no active warning {warning_id} on cell {self.config.pci}")
        for idx in state.si_indexes:
            del self.slots[idx]
        self.mark_dirty()
        self.pending_si_modification = True
        return state

    def si_broadcast(self, si_index: int) -> tuple[SiBroadcast, WarningState] | None:
        """Body for one SI occasion, read from live state at emission time."""
        slot = self.slots.get(si_index)
        if slot is None:
            return None
        wid, pos = slot
        state = self.warnings[wid]
        seg = state.segments[pos]
        return SiBroadcast(pci=self.config.pci, si_index=si_index,
                           body=codec.frame_segment(seg)), state

    def take_paging(self) -> PagingMessage | None:
        """Consume pending notification flags into one paging message."""
        if not (self.pending_si_modification or self.pending_etws_indication):
            return None
        msg = PagingMessage(pci=self.config.pci,
                            si_modification=self.pending_si_modification,
                            etws_cmas_indication=self.pending_etws_indication)
        self.pending_si_modification = False
        self.pending_etws_indication = False
        return msg
