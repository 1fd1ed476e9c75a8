"""Cross-cell verification sessions: ordering, outcomes, passivity."""

from __future__ import annotations

import pytest

from pwsim.sim import Simulation
from pwsim.verify import VerificationPolicy

IMSI = "001010000000001"
TEXT = "Flash flood warning for zone 4, move to high ground"


def _sim(policy, **cfg):
    sim = Simulation()
    sim.apply_now("configure", {"config": cfg, "policy": policy})
    return sim


def _cell(sim, pci, **kw):
    args = {"pci": pci, "plmn": "001-01"}
    args.update(kw)
    sim.apply_now("add_cell", args)


def _ue(sim, ue_id=1, profile="handset-a"):
    from pwsim.ue import BUILTIN_PROFILES
    sim.apply_now("add_ue", {"id": ue_id, "imsi": IMSI,
                             "profile": BUILTIN_PROFILES[profile].to_json()})
    return sim.ues[ue_id]


def _power(sim, pci, rx, ue_id=1):
    sim.apply_now("set_power", {"ue_id": ue_id, "pci": pci, "rx_dbm": rx})


def _warn(sim, pci, ident=0x1112, serial=1, text=TEXT):
    sim.apply_now("start_warning", {"pci": pci, "message_identifier": ident,
                                    "serial_number": serial, "text": text})


def _ue_events(sim, ue_id, name):
    return [e for e in sim.events if e.entity == f"ue:{ue_id}" and e.event == name]


def test_policy_validation():
    VerificationPolicy().validate()
    with pytest.raises(ValueError):
        VerificationPolicy(max_cells_to_scan=0).validate()
    with pytest.raises(ValueError):
        VerificationPolicy(required_matches=5, max_cells_to_scan=4).validate()
    with pytest.raises(ValueError):
        VerificationPolicy(scan_timeout_ms=0).validate()
    with pytest.raises(ValueError):
        VerificationPolicy(carrier_list=()).validate()


def test_candidate_order_carrier_list_before_power():
    # carrier 0 must be exhausted before carrier 1, regardless of rx power
    policy = {"max_cells_to_scan": 3, "required_matches": 2,
              "scan_timeout_ms": 20000, "carrier_list": [0, 1]}
    sim = _sim(policy)
    _cell(sim, 10, carrier=0)          # origin: strongest, UE camps here
    _cell(sim, 20, carrier=1)
    _cell(sim, 40, carrier=0)
    for pci in (10, 20, 40):
        _warn(sim, pci)
    _ue(sim)
    _power(sim, 10, -60.0)
    _power(sim, 20, -65.0)
    _power(sim, 40, -95.0)     # weakest, but carrier 0 goes first
    sim.run(2000)
    scans = [e.detail["pci"] for e in _ue_events(sim, 1, "verification_scan")]
    assert scans == [40, 20]
    verdict = _ue_events(sim, 1, "verification_verdict")[0].detail
    assert verdict["status"] == "Verified"
    assert verdict["matching_pcis"] == [40, 20]


def test_early_stop_skips_remaining_candidates():
    policy = {"max_cells_to_scan": 4, "required_matches": 1,
              "scan_timeout_ms": 20000, "carrier_list": [0]}
    sim = _sim(policy)
    for pci in (10, 11, 12):
        _cell(sim, pci)
        _warn(sim, pci)
    _ue(sim)
    _power(sim, 10, -70.0)
    _power(sim, 11, -80.0)
    _power(sim, 12, -85.0)
    sim.run(2000)
    scans = [e.detail["pci"] for e in _ue_events(sim, 1, "verification_scan")]
    assert scans == [11]
    verdict = _ue_events(sim, 1, "verification_verdict")[0].detail
    assert verdict == {
        "status": "Verified", "reason": "EnoughMatches",
        "content_hash": verdict["content_hash"],
        "origin_pci": 10, "matching_pcis": [11], "scanned_pcis": [11],
        "started_ms": 320, "concluded_ms": 320,
    }


def test_timeout_when_candidate_never_delivers():
    # neighbor sib1 fires at 320 just before the session starts; with a
    # 100 ms budget the next one at 480 is out of reach
    policy = {"max_cells_to_scan": 4, "required_matches": 1,
              "scan_timeout_ms": 100, "carrier_list": [0]}
    sim = _sim(policy)
    _cell(sim, 66)
    _cell(sim, 11)
    _warn(sim, 66)
    _ue(sim)
    _power(sim, 66, -70.0)
    _power(sim, 11, -80.0)
    sim.run(2000)
    verdict = _ue_events(sim, 1, "verification_verdict")[0].detail
    assert verdict["status"] == "Unverified"
    assert verdict["reason"] == "Timeout"
    assert verdict["started_ms"] == 320
    assert verdict["concluded_ms"] == 420
    assert verdict["scanned_pcis"] == []


def test_mismatched_content_is_not_a_match():
    policy = {"max_cells_to_scan": 4, "required_matches": 1,
              "scan_timeout_ms": 20000, "carrier_list": [0]}
    sim = _sim(policy)
    _cell(sim, 66)
    _cell(sim, 10)
    _warn(sim, 66, text=TEXT + " fake detail")
    _warn(sim, 10, text=TEXT)          # same id and serial, different bytes
    _ue(sim)
    _power(sim, 66, -70.0)
    _power(sim, 10, -80.0)
    sim.run(2000)
    results = [e.detail for e in _ue_events(sim, 1, "verification_scan_result")]
    assert results == [{"pci": 10, "match": False}]
    verdict = _ue_events(sim, 1, "verification_verdict")[0].detail
    assert (verdict["status"], verdict["reason"]) == ("Unverified", "ScanExhausted")


def test_second_display_during_session_is_skipped():
    policy = {"max_cells_to_scan": 4, "required_matches": 1,
              "scan_timeout_ms": 20000, "carrier_list": [0]}
    sim = _sim(policy)
    _cell(sim, 66)
    _cell(sim, 11)                      # silent neighbor keeps the scan waiting
    _warn(sim, 66, ident=0x1112)
    _warn(sim, 66, ident=0x1113)
    _ue(sim)
    _power(sim, 66, -70.0)
    _power(sim, 11, -80.0)
    sim.run(2000)
    skipped = _ue_events(sim, 1, "verification_skipped")
    assert len(skipped) == 1
    assert skipped[0].detail["message_identifier"] == 0x1113
    assert skipped[0].detail["reason"] == "already_verifying"


def test_no_policy_means_no_sessions():
    sim = Simulation()
    _cell(sim, 10)
    _warn(sim, 10)
    _ue(sim)
    _power(sim, 10, -70.0)
    sim.run(1000)
    assert _ue_events(sim, 1, "verification_started") == []
    assert len(_ue_events(sim, 1, "alert_displayed")) == 1


def test_registration_deferred_until_verdict():
    policy = {"max_cells_to_scan": 4, "required_matches": 1,
              "scan_timeout_ms": 20000, "carrier_list": [0]}
    sim = _sim(policy)
    sim.apply_now("add_subscriber", {"imsi": IMSI, "display_name": "t"})
    _cell(sim, 10, has_core=True)
    _cell(sim, 11)
    _warn(sim, 10)
    _warn(sim, 11)
    _ue(sim)
    _power(sim, 10, -70.0)
    _power(sim, 11, -80.0)
    sim.run(2000)
    verdict_seq = _ue_events(sim, 1, "verification_verdict")[0].seq
    attempts = _ue_events(sim, 1, "registration_attempt")
    assert attempts, "device should attach after the verdict"
    assert all(e.seq > verdict_seq for e in attempts)
    started_seq = _ue_events(sim, 1, "verification_started")[0].seq
    # fully passive while the session runs: no uplink in between
    for e in sim.events:
        if started_seq < e.seq < verdict_seq:
            assert e.event not in ("registration_attempt", "registration_success")
