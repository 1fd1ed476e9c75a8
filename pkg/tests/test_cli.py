"""Command line interface: run, encode, replay and scenarios subcommands."""

from __future__ import annotations

import json
from importlib import resources

import pytest

from pwsim import codec
from pwsim.cli import main

MINIMAL = {
    "name": "minimal",
    "cells": [{"pci": 10, "plmn": "001-01"}],
    "ues": [{"id": 1, "imsi": "001010000000001", "profile": "handset-a",
             "power": {"10": -70}}],
    "timeline": [{"at": 0, "op": "start_warning",
                  "args": {"pci": 10, "message_identifier": 4370,
                           "serial_number": 1, "text": "shelter in place"}}],
    "run_until": 1000,
    "expectations": [{"kind": "alert_count", "ue": 1, "equals": 1}],
}


def _packaged_path(name):
    return str(resources.files("pwsim").joinpath(f"scenarios/{name}.json"))


def test_run_packaged_scenario_passes(capsys):
    assert main(["run", _packaged_path("attack_basic")]) == 0
    out = capsys.readouterr().out
    assert "scenario : attack_basic" in out
    assert "[PASS]" in out
    assert "[FAIL]" not in out
    assert out.rstrip().endswith("result   : PASS")


def test_run_writes_log_and_summary(tmp_path, capsys):
    scn = tmp_path / "s.json"
    scn.write_text(json.dumps(MINIMAL))
    log = tmp_path / "run.ldjson"
    summary = tmp_path / "summary.json"
    rc = main(["run", str(scn), "--log", str(log), "--summary", str(summary),
               "--quiet"])
    assert rc == 0
    assert capsys.readouterr().out == ""
    records = [json.loads(line) for line in log.read_text().splitlines()]
    assert [r["seq"] for r in records] == list(range(len(records)))
    doc = json.loads(summary.read_text())
    assert doc["passed"] is True
    assert doc["now"] == 1000


def test_run_failing_expectation_exits_2(tmp_path, capsys):
    scn = json.loads(json.dumps(MINIMAL))
    scn["expectations"] = [{"kind": "alert_count", "ue": 1, "equals": 3}]
    path = tmp_path / "fail.json"
    path.write_text(json.dumps(scn))
    assert main(["run", str(path)]) == 2
    out = capsys.readouterr().out
    assert "[FAIL]" in out
    assert out.rstrip().endswith("result   : FAIL")


def test_run_bad_scenario_file_exits_1(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json")]) == 1
    assert capsys.readouterr().err.startswith("scenario error:")


def test_run_until_override(tmp_path, capsys):
    # Cut the run short of the first broadcast window: the alert_count
    # expectation then fails, proving --until overrides run_until.
    scn = tmp_path / "s.json"
    scn.write_text(json.dumps(MINIMAL))
    assert main(["run", str(scn), "--until", "100"]) == 2
    assert "clock    : 100 ms" in capsys.readouterr().out


def test_encode_gsm7(capsys):
    assert main(["encode", "hello world"]) == 0
    out = capsys.readouterr().out
    assert "coding       : gsm7 (dcs 0x01)" in out
    assert "text units   : 11 (93 per page)" in out
    assert "pages        : 1" in out
    assert "segments     : 1 (budget 372 octets)" in out
    payload = codec.WarningPayload(message_identifier=4370, serial_number=1,
                                   coding=codec.Coding.GSM7, text="hello world")
    assert f"content hash : {codec.content_hash(codec.paginate(payload))}" in out
    # 11 septets pack into 10 octets.
    assert "page 1: used 10 of 82 octets" in out


def test_encode_auto_detects_ucs2(capsys):
    assert main(["encode", "snow ☃"]) == 0
    out = capsys.readouterr().out
    assert "coding       : ucs2 (dcs 0x48)" in out
    assert "text units   : 6 (41 per page)" in out
    assert "page 1: used 12 of 82 octets" in out


def test_encode_hex_dump_matches_frames(capsys):
    assert main(["encode", "hello", "--hex"]) == 0
    out = capsys.readouterr().out
    payload = codec.WarningPayload(message_identifier=4370, serial_number=1,
                                   coding=codec.Coding.GSM7, text="hello")
    seg = codec.segment(codec.paginate(payload), codec.DEFAULT_SI_BUDGET)[0]
    body = codec.frame_segment(seg)
    assert f"segment 0 ({len(body)} octets):" in out
    assert codec.hex_dump(body) in out


def test_encode_multi_page_counts(capsys):
    assert main(["encode", "a" * 200]) == 0
    out = capsys.readouterr().out
    assert "pages        : 3" in out
    assert "page 1: used 82 of 82 octets" in out
    assert "page 3: used 13 of 82 octets" in out


def test_encode_unencodable_character_exits_1(capsys):
    assert main(["encode", "€", "--coding", "gsm7"]) == 1
    assert capsys.readouterr().err.startswith("encode error:")


def test_encode_too_long_exits_1(capsys):
    assert main(["encode", "a" * 1396]) == 1
    err = capsys.readouterr().err
    assert err.startswith("encode error:")
    assert "16" in err


def test_replay_snapshot_and_expect(tmp_path, capsys):
    log = tmp_path / "run.ldjson"
    assert main(["run", _packaged_path("attack_basic"), "--log", str(log),
                 "--quiet"]) == 0
    snap = tmp_path / "snap.json"
    assert main(["replay", str(log), "--snapshot", str(snap)]) == 0
    printed = capsys.readouterr().out.strip()
    assert printed == snap.read_text().strip()
    assert json.loads(printed)["now"] > 0

    assert main(["replay", str(log), "--expect", str(snap)]) == 0
    assert "replay matches expected snapshot" in capsys.readouterr().out


def test_replay_expect_mismatch_exits_2(tmp_path, capsys):
    log = tmp_path / "run.ldjson"
    main(["run", _packaged_path("attack_basic"), "--log", str(log), "--quiet"])
    snap = tmp_path / "snap.json"
    main(["replay", str(log), "--snapshot", str(snap)])
    capsys.readouterr()
    doc = json.loads(snap.read_text())
    doc["now"] += 160
    snap.write_text(json.dumps(doc, sort_keys=True))
    assert main(["replay", str(log), "--expect", str(snap)]) == 2
    assert "replay diverged" in capsys.readouterr().err


def test_scenarios_lists_packaged(capsys):
    assert main(["scenarios"]) == 0
    names = capsys.readouterr().out.split()
    assert names == sorted(names)
    assert "attack_basic" in names
    assert "crosscell_verified" in names
    assert len(names) == 12


def test_unknown_subcommand_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["frobnicate"])
