"""Cell-side broadcast state: SI slots, value tag, paging flags."""

from __future__ import annotations

import pytest

from pwsim import codec
from pwsim.radio import (
    Cell,
    CellConfig,
    MAX_SI_MESSAGES,
    PagingMessage,
    TooManySiMessages,
    UnknownWarning,
)


def _cell(pci=10, **kw):
    cfg = CellConfig(pci=pci, plmn="001-01", tac=1, cell_identity=100 + pci, **kw)
    cfg.validate()
    return Cell(config=cfg, si_period_ms=320)


def _warning(ident, serial=1, pages=1):
    payload = codec.WarningPayload(message_identifier=ident, serial_number=serial,
                                   coding=codec.Coding.GSM7, text="x" * (93 * pages))
    return payload, codec.segment(codec.paginate(payload))


def _add(cell, wid, ident=None, serial=1, pages=1):
    payload, segs = _warning(ident if ident is not None else 0x1000 + wid, serial, pages)
    return cell.add_warning(wid, payload, segs, codec.DEFAULT_SI_BUDGET)


def test_cell_config_validation():
    with pytest.raises(ValueError):
        CellConfig(pci=1008, plmn="001-01", tac=1, cell_identity=1).validate()
    with pytest.raises(ValueError):
        CellConfig(pci=1, plmn="00101", tac=1, cell_identity=1).validate()
    with pytest.raises(ValueError):
        CellConfig(pci=1, plmn="001-01", tac=-1, cell_identity=1).validate()
    CellConfig(pci=0, plmn="999-999", tac=0, cell_identity=0).validate()


def test_slots_allocated_lowest_free_first():
    cell = _cell()
    a = _add(cell, 1, pages=5)          # 5 pages -> 2 segments at the default budget
    b = _add(cell, 2)
    assert a.si_indexes == [0, 1]
    assert b.si_indexes == [2]
    cell.remove_warning(1)
    c = _add(cell, 3)
    assert c.si_indexes == [0]          # freed slots are reused from the bottom


def test_slot_capacity_hard_limit():
    cell = _cell()
    for wid in range(MAX_SI_MESSAGES):
        _add(cell, wid)
    assert cell.free_slot_count() == 0
    with pytest.raises(TooManySiMessages):
        _add(cell, 99)
    # the failed add must not leak partial state
    assert len(cell.slots) == MAX_SI_MESSAGES
    assert 99 not in cell.warnings


def test_replace_needs_room_for_extra_segments():
    cell = _cell()
    for wid in range(31):
        _add(cell, wid)
    payload, segs = _warning(0x1000, serial=2, pages=9)   # 9 pages -> 3 segments
    with pytest.raises(TooManySiMessages):
        cell.replace_warning(0, payload, segs, codec.DEFAULT_SI_BUDGET)
    # state unchanged: warning 0 still occupies exactly its old slot
    assert cell.warnings[0].si_indexes == [0]
    assert cell.slots[0] == (0, 0)


def test_replace_reallocates_contiguously_from_lowest():
    cell = _cell()
    _add(cell, 1)
    _add(cell, 2)
    payload, segs = _warning(0x1001, serial=2, pages=5)
    state = cell.replace_warning(1, payload, segs, codec.DEFAULT_SI_BUDGET)
    # slot 0 freed then retaken, second segment lands after warning 2
    assert state.si_indexes == [0, 2]
    assert cell.slots[1] == (2, 0)


def test_value_tag_bumps_once_per_emission():
    cell = _cell()
    assert cell.sib1().value_tag == 0
    _add(cell, 1)
    _add(cell, 2)                        # burst of changes between emissions
    assert cell.sib1().value_tag == 1
    assert cell.sib1().value_tag == 1    # stable until the next change
    cell.remove_warning(1)
    assert cell.sib1().value_tag == 2


def test_value_tag_wraps_mod_32():
    cell = _cell()
    cell.value_tag = 31
    cell.mark_dirty()
    assert cell.sib1().value_tag == 0


def test_sib1_scheduling_lists_occupied_slots_sorted():
    cell = _cell()
    _add(cell, 1, pages=5)
    sched = cell.sib1().scheduling
    assert [e.si_index for e in sched] == [0, 1]
    assert all(e.contains_sib8 and e.period_ms == 320 for e in sched)


def test_si_broadcast_reads_live_state():
    cell = _cell()
    _add(cell, 1)
    out = cell.si_broadcast(0)
    assert out is not None
    broadcast, state = out
    assert broadcast.pci == 10 and broadcast.si_index == 0
    assert codec.parse_frame(broadcast.body).message_identifier == 0x1001
    assert state.warning_id == 1
    assert cell.si_broadcast(5) is None


def test_take_paging_consumes_flags_once():
    cell = _cell()
    assert cell.take_paging() is None
    cell.pending_si_modification = True
    cell.pending_etws_indication = True
    msg = cell.take_paging()
    assert msg == PagingMessage(pci=10, si_modification=True, etws_cmas_indication=True)
    assert cell.take_paging() is None


def test_paging_message_requires_a_flag():
    with pytest.raises(ValueError):
        PagingMessage(pci=1, si_modification=False, etws_cmas_indication=False)


def test_remove_unknown_warning():
    cell = _cell()
    with pytest.raises(UnknownWarning):
        cell.remove_warning(42)
    payload, segs = _warning(0x1000)
    with pytest.raises(UnknownWarning):
        cell.replace_warning(42, payload, segs, codec.DEFAULT_SI_BUDGET)


def test_broadcast_structs_carry_no_operator_fields():
    # over the air nothing may reveal the rogue or subscriber-store flags
    cell = _cell(is_rogue=True, has_core=True)
    _add(cell, 1)
    sib1 = cell.sib1()
    for struct_obj in (sib1, cell.si_broadcast(0)[0]):
        fields = vars(struct_obj)
        assert "is_rogue" not in fields
        assert "has_core" not in fields
