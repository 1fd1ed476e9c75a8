"""Simulation event records and the line-delimited JSON log format."""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class SimEvent:
    time_ms: int
    seq: int
    entity: str
    event: str
    detail: dict

    def to_json(self) -> str:
        # field order is part of the log format, so build the dict explicitly
        rec = {"t": self.time_ms, "seq": self.seq, "entity": self.entity,
               "event": self.event, "detail": self.detail}
        return json.dumps(rec, separators=(",", ":"), ensure_ascii=False, sort_keys=False)


def dump_log(events: list[SimEvent]) -> str:
    return "".join(e.to_json() + "\n" for e in events)


def parse_log_line(line: str) -> SimEvent:
    rec = json.loads(line)
    return SimEvent(time_ms=rec["t"], seq=rec["seq"], entity=rec["entity"],
                    event=rec["event"], detail=rec["detail"])
