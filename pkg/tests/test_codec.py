"""Codec pipeline: pagination, segmentation, framing, reassembly, hashing."""

from __future__ import annotations

import hashlib
import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwsim import codec, gsm7
from pwsim.codec import (
    Coding,
    ConflictingSegments,
    EncodedPage,
    EncodedWarning,
    FramingError,
    Incomplete,
    MessageTooLong,
    Sib8Segment,
    UnencodableCharacter,
    WarningPayload,
)

GOLDEN_HASH = "115ee0691d8c985295b33faf76a3378fb76ad0fe53cd261b36f7e99ef09ea471"


def _payload(text, coding=Coding.GSM7, ident=0x1112, serial=1):
    return WarningPayload(message_identifier=ident, serial_number=serial,
                          coding=coding, text=text)


def test_capacity_constants():
    assert codec.PAGE_DATA_OCTETS == 82
    assert codec.GSM7_CHARS_PER_PAGE == 93 == (82 * 8) // 7
    assert codec.UCS2_UNITS_PER_PAGE == 41
    assert codec.PAGE_BLOCK_OCTETS == 83
    assert codec.FRAME_OVERHEAD == 12
    assert codec.MAX_PAGES == 15
    assert (codec.DEFAULT_SI_BUDGET - codec.FRAME_OVERHEAD) // codec.PAGE_BLOCK_OCTETS == 4
    assert codec.DCS_GSM7 == 0x01
    assert codec.DCS_UCS2 == 0x48


def test_golden_content_hash():
    # canonical stream for ident 0x1112, serial 1, 7-bit text "a":
    # >H ident, >H serial, dcs octet, then the single used octet 0xe1
    # (septet 0x61 in bits 0..6, low bit of the CR filler in bit 7)
    stream = struct.pack(">HH", 0x1112, 1) + bytes([0x01]) + b"\xe1"
    assert hashlib.sha256(stream).hexdigest() == GOLDEN_HASH
    warning = codec.paginate(_payload("a"))
    assert warning.pages[0].used_length == 1
    assert warning.pages[0].data[0] == 0xE1
    assert codec.content_hash(warning) == GOLDEN_HASH


def test_content_hash_ignores_segmentation():
    text = "evacuate now " * 40   # several pages
    warning = codec.paginate(_payload(text))
    h = codec.content_hash(warning)
    for budget in (372, 180, 95):
        segs = codec.segment(warning, si_budget=budget)
        assert codec.content_hash(codec.reassemble(segs)) == h


def test_pagination_boundaries_gsm7():
    assert len(codec.paginate(_payload("x" * 93)).pages) == 1
    assert len(codec.paginate(_payload("x" * 94)).pages) == 2
    assert len(codec.paginate(_payload("x" * 1395)).pages) == 15
    with pytest.raises(MessageTooLong) as e:
        codec.paginate(_payload("x" * 1396))
    assert e.value.pages_needed == 16


def test_pagination_boundaries_ucs2():
    assert len(codec.paginate(_payload("я" * 41, Coding.UCS2)).pages) == 1
    assert len(codec.paginate(_payload("я" * 42, Coding.UCS2)).pages) == 2
    assert len(codec.paginate(_payload("я" * 615, Coding.UCS2)).pages) == 15
    with pytest.raises(MessageTooLong):
        codec.paginate(_payload("я" * 616, Coding.UCS2))


def test_payload_validation():
    with pytest.raises(ValueError):
        codec.paginate(_payload("x", ident=0x10000))
    with pytest.raises(ValueError):
        codec.paginate(_payload("x", serial=-1))
    with pytest.raises(ValueError):
        codec.paginate(_payload(""))
    with pytest.raises(UnencodableCharacter) as e:
        codec.paginate(_payload("ok [bad]"))
    assert e.value.index == 3 and e.value.char == "["
    with pytest.raises(codec.OutOfPlane):
        codec.paginate(_payload("emoji \U0001f6a8", Coding.UCS2))


def test_gsm7_page_used_length_and_padding():
    warning = codec.paginate(_payload("hello"))
    page = warning.pages[0]
    assert len(page.data) == 82
    assert page.used_length == (7 * 5 + 7) // 8 == 5
    # the used prefix starts with the bare packing of "hello"; the final used
    # octet also carries low bits of the first CR filler septet in its high bits
    assert page.data[:4] == bytes.fromhex("e8329bfd")
    assert page.data[4] & 0x07 == 0x06
    # filler beyond the text is packed CR septets, never zeros
    tail = gsm7.unpack(page.data, 93)
    assert tail[:5] == "hello"
    assert set(tail[5:]) == {"\r"}


def test_ucs2_page_layout():
    warning = codec.paginate(_payload("abр", Coding.UCS2))
    page = warning.pages[0]
    assert page.used_length == 6
    assert page.data[:6] == b"\x00a\x00b\x04\x40"
    assert page.data[6:8] == codec.UCS2_PAD_UNIT


def test_segment_counts_by_budget():
    warning = codec.paginate(_payload("x" * (93 * 5)))   # 5 pages
    assert len(codec.segment(warning, 372)) == 2         # 4 blocks + 1 block
    assert len(codec.segment(warning, 180)) == 3         # 2 blocks per segment
    assert len(codec.segment(warning, 95)) == 5          # 1 block per segment
    with pytest.raises(codec.BudgetTooSmall):
        codec.segment(warning, 94)
    for seg in codec.segment(warning, 180):
        assert len(codec.frame_segment(seg)) <= 180


def test_segment_flags_and_dcs_placement():
    warning = codec.paginate(_payload("x" * (93 * 5)))
    segs = codec.segment(warning, 372)
    assert [s.segment_number for s in segs] == [0, 1]
    assert [s.is_last for s in segs] == [False, True]
    assert segs[0].dcs_octet == 0x01 and segs[1].dcs_octet is None
    with pytest.raises(ValueError):
        Sib8Segment(1, 1, 1, True, 0x01, b"\x00")   # dcs on a non-first segment
    with pytest.raises(ValueError):
        Sib8Segment(1, 1, 0, True, None, b"\x00")   # first segment without dcs


def test_frame_layout_by_hand():
    warning = codec.paginate(_payload("a", ident=0x1112, serial=0x0001))
    seg = codec.segment(warning)[0]
    body = codec.frame_segment(seg)
    assert len(body) == 12 + 83
    ident, serial, flags, dcs, seg_num, payload_len, reserved = struct.unpack(">HHBBHHH", body[:12])
    assert (ident, serial) == (0x1112, 0x0001)
    assert flags == codec.FLAG_IS_LAST | codec.FLAG_DCS_PRESENT == 0x03
    assert dcs == 0x01
    assert (seg_num, payload_len, reserved) == (0, 83, 0)
    assert body[12] == 1            # used_length of the single page block
    assert body[13] == 0xE1
    parsed = codec.parse_frame(body)
    assert parsed == seg


def test_non_first_frame_has_no_dcs_octet():
    warning = codec.paginate(_payload("x" * (93 * 5)))
    seg = codec.segment(warning)[1]
    body = codec.frame_segment(seg)
    assert len(body) == 11 + len(seg.segment_bytes)
    ident, serial, flags = struct.unpack(">HHB", body[:5])
    assert flags == codec.FLAG_IS_LAST
    assert codec.parse_frame(body) == seg


def test_parse_frame_rejects_malformed_bodies():
    warning = codec.paginate(_payload("a"))
    body = codec.frame_segment(codec.segment(warning)[0])
    with pytest.raises(FramingError):
        codec.parse_frame(body[:10])                       # under minimum header
    with pytest.raises(FramingError):
        codec.parse_frame(body[:-1])                       # payload_len mismatch
    bad_reserved = bytearray(body)
    bad_reserved[10] = 0xFF
    with pytest.raises(FramingError):
        codec.parse_frame(bytes(bad_reserved))
    no_dcs_flag = bytearray(body)
    no_dcs_flag[4] &= ~codec.FLAG_DCS_PRESENT
    with pytest.raises(FramingError):                      # seg 0 must carry dcs
        codec.parse_frame(bytes(no_dcs_flag))


def test_reassemble_any_order_and_duplicates():
    text = "shelter in place " * 30
    warning = codec.paginate(_payload(text))
    segs = codec.segment(warning, 180)
    shuffled = segs[::-1] + [segs[1]]                      # reversed plus a dup
    out = codec.reassemble(shuffled)
    assert codec.decode_text(out) == text
    assert out == warning


def test_reassemble_error_cases():
    warning = codec.paginate(_payload("x" * (93 * 5)))
    s0, s1, s2 = codec.segment(warning, 180)
    with pytest.raises(Incomplete) as e:
        codec.reassemble([s0, s2])
    assert e.value.missing == [1]
    with pytest.raises(Incomplete) as e:
        codec.reassemble([s0, s1])                         # no segment marked last
    assert e.value.missing == [2]
    tampered = Sib8Segment(s1.message_identifier, s1.serial_number, 1, False,
                           None, bytes(83 * 2))
    with pytest.raises(ConflictingSegments):
        codec.reassemble([s0, s1, s2, tampered])
    other = codec.segment(codec.paginate(_payload("y", serial=9)))[0]
    with pytest.raises(ConflictingSegments):
        codec.reassemble([s0, other])
    early_last = Sib8Segment(s0.message_identifier, s0.serial_number, 1, True,
                             None, s1.segment_bytes)
    with pytest.raises(ConflictingSegments):
        codec.reassemble([s0, early_last, s2])             # two segments claim last


def test_segment_raw_carries_oversized_streams():
    blob = bytes([1] + [0xE1] + [0] * 81) * 16             # 16 one-octet pages
    segs = codec.segment_raw(0x1112, 7, 0x01, blob)
    assert len(segs) == 4
    with pytest.raises(ValueError):                        # receiver enforces the cap
        codec.reassemble(segs)


def test_cr_boundary_round_trips():
    # 7 chars: used=7, 8*7//7 = 8 candidate septets, ambiguous; filler stripped
    assert _round_trip("aaaaaaX") == "aaaaaaX"
    # text whose real final char is CR at an ambiguous boundary is lossy by design
    assert _round_trip("aaaaaaa\r") == "aaaaaaa"
    # CR in the middle survives
    assert _round_trip("a\rb") == "a\rb"
    # 16-bit coding has no such ambiguity
    warning = codec.paginate(_payload("ab\r", Coding.UCS2))
    assert codec.decode_text(warning) == "ab\r"


def _round_trip(text, coding=Coding.GSM7):
    warning = codec.paginate(_payload(text, coding))
    segs = codec.segment(warning)
    return codec.decode_text(codec.reassemble(segs))


def test_detect_coding():
    assert codec.detect_coding("Evacuate zone 4 now") is Coding.GSM7
    assert codec.detect_coding("Эвакуация") is Coding.UCS2
    assert codec.detect_coding("brackets [here]") is Coding.UCS2


def test_hex_dump_format():
    assert codec.hex_dump(b"\x00\xabZ") == "00 ab 5a"


def test_decode_rejects_unknown_dcs():
    page = EncodedPage(data=bytes(82), used_length=2)
    warning = EncodedWarning(1, 1, 0x7F, (page,))
    with pytest.raises(codec.UnknownDcs):
        codec.decode_text(warning)


def test_si_message_budget_enforced():
    with pytest.raises(ValueError):
        codec.SiMessage(si_index=0, body=bytes(373))
    warning = codec.paginate(_payload("x" * 1395))
    for seg in codec.segment(warning):
        msg = codec.build_si_message(0, seg)
        assert len(msg.body) <= 372


# -- property tests ----------------------------------------------------------

# exclude CR so random texts never end in the filler character
_GSM7_NO_CR = st.sampled_from([c for c in gsm7.ALPHABET if c != "\r"])
_BMP_CHAR = st.characters(
    min_codepoint=1, max_codepoint=0xFFFF,
    exclude_categories=("Cs",),
)


@settings(max_examples=150, deadline=None)
@given(st.text(alphabet=_GSM7_NO_CR, min_size=1, max_size=1395))
def test_property_gsm7_round_trip(text):
    assert _round_trip(text) == text


@settings(max_examples=150, deadline=None)
@given(st.text(alphabet=_BMP_CHAR, min_size=1, max_size=615))
def test_property_ucs2_round_trip(text):
    assert _round_trip(text, Coding.UCS2) == text


@settings(max_examples=80, deadline=None)
@given(st.text(alphabet=_GSM7_NO_CR, min_size=1, max_size=1395),
       st.sampled_from([95, 180, 240, 372]))
def test_property_framed_segments_fit_budget(text, budget):
    warning = codec.paginate(_payload(text))
    segs = codec.segment(warning, budget)
    for seg in segs:
        assert len(codec.frame_segment(seg)) <= budget
    assert codec.reassemble(random.Random(0).sample(segs, len(segs))) == warning
