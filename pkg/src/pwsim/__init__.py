"""Deterministic testbed for cell-broadcast warning delivery.

Simulates the full path from an operator command to text on a handset
screen: page encoding, broadcast segmentation, scheduling, device-side
reassembly and display, link parsing, a spoofed-cell attacker, and a
cross-cell verification defense.  Everything runs on an integer
millisecond clock and identical inputs give byte-identical event logs.
"""

from .codec import (Coding, EncodedPage, EncodedWarning, Sib8Segment,
                    WarningPayload, content_hash, decode_text, paginate,
                    reassemble, segment)
from .events import SimEvent, dump_log, parse_log_line
from .linkify import ParsedSpan, SpanKind, parse_content
from .radio import Cell, CellConfig
from .scenario import load_scenario, replay_from_log, run_scenario
from .sim import SimConfig, Simulation
from .ue import BUILTIN_PROFILES, Ue, UeProfile
from .verify import VerificationPolicy, VerificationVerdict

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_PROFILES", "Cell", "CellConfig", "Coding", "EncodedPage",
    "EncodedWarning", "ParsedSpan", "Sib8Segment", "SimConfig", "SimEvent",
    "Simulation", "SpanKind", "Ue", "UeProfile", "VerificationPolicy",
    "VerificationVerdict", "WarningPayload", "content_hash", "decode_text",
    "dump_log", "load_scenario", "paginate", "parse_content",
    "parse_log_line", "reassemble", "replay_from_log",
    "run_scenario", "segment",
]
