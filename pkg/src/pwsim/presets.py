"""Canned operator sequences, applied to a live simulation.

Each preset expands to ordinary commands submitted through the normal
queue, so preset runs replay from the log like anything else.
"""

from __future__ import annotations

from . import codec
from .sim import CommandError, Simulation

FLOOD_TEXT = ("Flash flood warning for the river district until 18:00. "
              "Move to higher ground and avoid low water crossings.")

_LONG_BASE = ("Severe weather is expected across the coastal strip this evening. "
              "Secure loose objects, stay indoors, and keep away from windows. "
              "Emergency crews are staged at the listed assembly points. ")


def _long_text(min_chars: int) -> str:
    reps = (min_chars + len(_LONG_BASE) - 1) // len(_LONG_BASE)
    return (_LONG_BASE * reps)[:min_chars].rstrip() + " End of message."


def _preset_single(sim: Simulation, args: dict) -> list[tuple[int, str, dict]]:
    return [(0, "start_warning", {
        "pci": int(args["pci"]),
        "message_identifier": int(args.get("message_identifier", 4370)),
        "serial_number": int(args.get("serial_number", 1)),
        "coding": "gsm7",
        "text": args.get("text", FLOOD_TEXT),
        "with_paging": bool(args.get("with_paging", True)),
    })]


def _preset_multi_segment(sim: Simulation, args: dict) -> list[tuple[int, str, dict]]:
    # five pages do not fit one SI message, so this forces segmentation
    text = args.get("text", _long_text(5 * codec.GSM7_CHARS_PER_PAGE - 40))
    return [(0, "start_warning", {
        "pci": int(args["pci"]),
        "message_identifier": int(args.get("message_identifier", 4371)),
        "serial_number": int(args.get("serial_number", 1)),
        "coding": "gsm7",
        "text": text,
        "with_paging": bool(args.get("with_paging", True)),
    })]


def _preset_serial_increment_loop(sim: Simulation, args: dict) -> list[tuple[int, str, dict]]:
    pci = int(args["pci"])
    count = int(args.get("count", 5))
    interval = int(args.get("interval_ms", 1000))
    if count < 1:
        raise CommandError(422, "count must be >= 1")
    active = [wid for wid, p in sim.warning_cell.items() if p == pci]
    items: list[tuple[int, str, dict]] = []
    if active:
        wid = max(active)
        state = sim.cells[pci].warnings[wid]
        if state.payload is None:
            raise CommandError(409, "cannot loop updates on a raw stream")
        serial = state.payload.serial_number
        first_update = 0
    else:
        wid = sim._next_warning_id
        serial = int(args.get("serial_number", 1))
        items.append((0, "start_warning", {
            "pci": pci,
            "message_identifier": int(args.get("message_identifier", 4370)),
            "serial_number": serial,
            "coding": "gsm7",
            "text": args.get("text", FLOOD_TEXT),
            "with_paging": bool(args.get("with_paging", True)),
        }))
        first_update = interval
    for i in range(count):
        items.append((first_update + i * interval, "update_warning", {
            "warning_id": wid,
            "changes": {"serial_number": serial + 1 + i},
        }))
    return items


def _preset_parallel_interleaved(sim: Simulation, args: dict) -> list[tuple[int, str, dict]]:
    # three multi-segment warnings started in the same instant, so their
    # segments interleave on the air per the staggered SI slot grid
    pci = int(args["pci"])
    text = _long_text(5 * codec.GSM7_CHARS_PER_PAGE - 40)
    return [
        (0, "start_warning", {
            "pci": pci, "message_identifier": 4370 + i, "serial_number": 1,
            "coding": "gsm7",
            "text": f"{text} Stream {i + 1}.",
            "with_paging": bool(args.get("with_paging", i == 0)),
        })
        for i in range(3)
    ]


PRESETS = {
    "Single": _preset_single,
    "MultiSegment": _preset_multi_segment,
    "SerialIncrementLoop": _preset_serial_increment_loop,
    "ParallelInterleaved": _preset_parallel_interleaved,
}


def apply_preset(sim: Simulation, name: str, args: dict) -> dict:
    builder = PRESETS.get(name)
    if builder is None:
        raise CommandError(404, f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    if "pci" not in args:
        raise CommandError(422, "preset args need a pci")
    if int(args["pci"]) not in sim.cells:
        raise CommandError(404, f"no cell with pci {args['pci']}")
    items = builder(sim, args)
    scheduled = []
    for offset, op, cmd_args in items:
        at = sim.submit(op, cmd_args, sim.now + offset)
        scheduled.append({"at_ms": at, "op": op, "args": cmd_args})
    return {"preset": name, "commands": scheduled}
