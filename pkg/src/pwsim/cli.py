"""Command line front end: run scenarios, serve the API, inspect encodings."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import codec
from .events import dump_log
from .scenario import (BadScenario, build_simulation, evaluate_expectations,
                       load_scenario, replay_from_log)


def _cmd_run(args) -> int:
    try:
        scn = load_scenario(args.scenario)
    except BadScenario as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 1
    sim = build_simulation(scn)
    sim.dump_si_hex = args.dump_si_hex
    until = args.until if args.until is not None else scn["run_until"]
    sim.run(until)
    summary = evaluate_expectations(sim, scn)
    if args.log:
        Path(args.log).write_text(dump_log(sim.events), encoding="utf-8")
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    if not args.quiet:
        print(f"scenario : {summary['name']}")
        print(f"clock    : {summary['now']} ms, {summary['events']} events")
        for check in summary["checks"]:
            mark = "PASS" if check["ok"] else "FAIL"
            print(f"  [{mark}] {check['kind']}: {check['message']}")
        print("result   : " + ("PASS" if summary["passed"] else "FAIL"))
    return 0 if summary["passed"] else 2


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import SimManager, create_app, packaged_scenarios
    manager = SimManager(log_path=args.log)
    if args.scenario:
        known = packaged_scenarios()
        source = known[args.scenario].read_text(encoding="utf-8") \
            if args.scenario in known else args.scenario
        try:
            manager.load_scenario(load_scenario(source), run=False)
        except BadScenario as exc:
            print(f"scenario error: {exc}", file=sys.stderr)
            return 1
        manager.sim.dump_si_hex = args.dump_si_hex
    app = create_app(manager)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_encode(args) -> int:
    try:
        coding = codec.detect_coding(args.text) if args.coding == "auto" \
            else codec.Coding(args.coding)
        payload = codec.WarningPayload(
            message_identifier=args.message_identifier,
            serial_number=args.serial_number,
            coding=coding, text=args.text)
        payload.validate()
        warning = codec.paginate(payload)
        segments = codec.segment(warning, args.si_budget)
    except codec.CodecError as exc:
        print(f"encode error: {exc}", file=sys.stderr)
        return 1
    per_page = codec.GSM7_CHARS_PER_PAGE if coding is codec.Coding.GSM7 \
        else codec.UCS2_UNITS_PER_PAGE
    print(f"coding       : {coding.value} (dcs 0x{codec.DCS_BY_CODING[coding]:02x})")
    print(f"text units   : {len(args.text)} ({per_page} per page)")
    print(f"pages        : {len(warning.pages)}")
    print(f"segments     : {len(segments)} (budget {args.si_budget} octets)")
    print(f"content hash : {codec.content_hash(warning)}")
    for num, page in enumerate(warning.pages, start=1):
        print(f"page {num}: used {page.used_length} of "
              f"{codec.PAGE_DATA_OCTETS} octets")
    if args.hex:
        for seg in segments:
            body = codec.frame_segment(seg)
            print(f"segment {seg.segment_number} ({len(body)} octets):")
            print("  " + codec.hex_dump(body))
    return 0


def _cmd_replay(args) -> int:
    text = Path(args.log).read_text(encoding="utf-8")
    sim = replay_from_log(text)
    snap = json.dumps(sim.snapshot(), sort_keys=True)
    if args.snapshot:
        Path(args.snapshot).write_text(snap + "\n", encoding="utf-8")
    if args.expect:
        want = Path(args.expect).read_text(encoding="utf-8").strip()
        if snap != want:
            print("replay diverged from expected snapshot", file=sys.stderr)
            return 2
        print("replay matches expected snapshot")
        return 0
    print(snap)
    return 0


def _cmd_scenarios(args) -> int:
    from .server import packaged_scenarios
    for name in sorted(packaged_scenarios()):
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pwsim",
        description="Deterministic testbed for cell-broadcast warning delivery, "
                    "spoofed-cell attacks and cross-cell verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file and check expectations")
    p.add_argument("scenario", help="path to a scenario JSON file")
    p.add_argument("--until", type=int, default=None, help="override run_until (ms)")
    p.add_argument("--log", default=None, help="write the event log to this file")
    p.add_argument("--summary", default=None, help="write the check summary JSON here")
    p.add_argument("--dump-si-hex", action="store_true",
                   help="include broadcast body hex in the event log")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("serve", help="start the HTTP control plane")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--scenario", default=None,
                   help="packaged scenario name or path to preload")
    p.add_argument("--log", default=None, help="append the event log to this file")
    p.add_argument("--dump-si-hex", action="store_true")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("encode", help="show how a text is paged and segmented")
    p.add_argument("text")
    p.add_argument("--coding", choices=["auto", "gsm7", "ucs2"], default="auto")
    p.add_argument("--message-identifier", type=int, default=4370)
    p.add_argument("--serial-number", type=int, default=1)
    p.add_argument("--si-budget", type=int, default=codec.DEFAULT_SI_BUDGET)
    p.add_argument("--hex", action="store_true", help="dump framed segment bytes")
    p.set_defaults(fn=_cmd_encode)

    p = sub.add_parser("replay", help="rebuild a run from its event log")
    p.add_argument("log", help="path to an event log (one JSON record per line)")
    p.add_argument("--snapshot", default=None, help="write the final snapshot here")
    p.add_argument("--expect", default=None,
                   help="compare against this snapshot file (exit 2 on mismatch)")
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("scenarios", help="list packaged scenarios")
    p.set_defaults(fn=_cmd_scenarios)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
