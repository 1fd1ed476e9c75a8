"""Warning-message codec: text -> pages -> broadcast segments and back.

A warning body is split into fixed 82-octet pages (at most 15), pages are
serialized as length-prefixed blocks, and the block stream is sliced into
numbered segments so each framed segment fits the per-SI byte budget.
Receivers reassemble segments in any order and recover the exact text.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from enum import Enum

from . import gsm7

PAGE_DATA_OCTETS = 82
MAX_PAGES = 15
GSM7_CHARS_PER_PAGE = 93          # floor(82 * 8 / 7)
UCS2_UNITS_PER_PAGE = 41          # 82 // 2
PAGE_BLOCK_OCTETS = 1 + PAGE_DATA_OCTETS
FRAME_OVERHEAD = 12               # header size when the coding octet is present
DEFAULT_SI_BUDGET = 372

DCS_GSM7 = 0x01
DCS_UCS2 = 0x48

UCS2_PAD_UNIT = b"\x00\x0d"


class Coding(Enum):
    GSM7 = "gsm7"
    UCS2 = "ucs2"


DCS_BY_CODING = {Coding.GSM7: DCS_GSM7, Coding.UCS2: DCS_UCS2}
CODING_BY_DCS = {v: k for k, v in DCS_BY_CODING.items()}


class CodecError(Exception):
    pass


class UnencodableCharacter(CodecError):
    def __init__(self, index: int, char: str):
        self.index = index
        self.char = char
        super().__init__(f"character {char!r} at index {index} is outside the 7-bit alphabet")


class OutOfPlane(CodecError):
    def __init__(self, index: int, char: str):
        self.index = index
        self.char = char
        super().__init__(f"character {char!r} at index {index} cannot be carried in 16-bit units")


class MessageTooLong(CodecError):
    def __init__(self, pages_needed: int):
        self.pages_needed = pages_needed
        super().__init__(f"message needs {pages_needed} pages, limit is {MAX_PAGES}")


class BudgetTooSmall(CodecError):
    def __init__(self, si_budget: int):
        self.si_budget = si_budget
        super().__init__(f"budget of {si_budget} octets cannot hold one framed page block")


class Incomplete(CodecError):
    def __init__(self, missing: list[int]):
        self.missing = missing
        super().__init__(f"missing segment numbers: {missing}")


class ConflictingSegments(CodecError):
    pass


class UnknownDcs(CodecError):
    def __init__(self, dcs_octet: int):
        self.dcs_octet = dcs_octet
        super().__init__(f"unknown coding octet 0x{dcs_octet:02x}")


class FramingError(CodecError):
    pass


@dataclass(frozen=True)
class WarningPayload:
    message_identifier: int
    serial_number: int
    coding: Coding
    text: str

    def validate(self) -> None:
        if not (0 <= self.message_identifier <= 0xFFFF):
            raise ValueError("message_identifier out of u16 range")
        if not (0 <= self.serial_number <= 0xFFFF):
            raise ValueError("serial_number out of u16 range")
        if not self.text:
            raise ValueError("text must be non-empty")
        if self.coding is Coding.GSM7:
            for i, c in enumerate(self.text):
                if c not in gsm7.CHAR_TO_SEPTET:
                    raise UnencodableCharacter(i, c)
        else:
            for i, c in enumerate(self.text):
                cp = ord(c)
                if cp > 0xFFFF or 0xD800 <= cp <= 0xDFFF:
                    raise OutOfPlane(i, c)


@dataclass(frozen=True)
class EncodedPage:
    data: bytes
    used_length: int

    def __post_init__(self):
        if len(self.data) != PAGE_DATA_OCTETS:
            raise ValueError(f"page data must be exactly {PAGE_DATA_OCTETS} octets")
        if not (1 <= self.used_length <= PAGE_DATA_OCTETS):
            raise ValueError("used_length out of range")


@dataclass(frozen=True)
class EncodedWarning:
    message_identifier: int
    serial_number: int
    dcs_octet: int
    pages: tuple[EncodedPage, ...]

    def __post_init__(self):
        if not (1 <= len(self.pages) <= MAX_PAGES):
            raise ValueError(f"page count must be in 1..{MAX_PAGES}")


@dataclass(frozen=True)
class Sib8Segment:
    message_identifier: int
    serial_number: int
    segment_number: int
    is_last: bool
    dcs_octet: int | None
    segment_bytes: bytes

    def __post_init__(self):
        if (self.dcs_octet is not None) != (self.segment_number == 0):
            raise ValueError("coding octet must be present exactly on segment 0")


@dataclass(frozen=True)
class SiMessage:
    si_index: int
    body: bytes

    def __post_init__(self):
        if len(self.body) > DEFAULT_SI_BUDGET:
            raise ValueError(f"SI body exceeds {DEFAULT_SI_BUDGET} octets")


def encode_gsm7(text: str) -> bytes:
    """Pack text into septets, LSB-first.  Returns ceil(7n/8) octets."""
    for i, c in enumerate(text):
        if c not in gsm7.CHAR_TO_SEPTET:
            raise UnencodableCharacter(i, c)
    return gsm7.pack(text)


def encode_ucs2(text: str) -> bytes:
    """Encode text as big-endian 16-bit units.  One unit per character."""
    for i, c in enumerate(text):
        cp = ord(c)
        if cp > 0xFFFF or 0xD800 <= cp <= 0xDFFF:
            raise OutOfPlane(i, c)
    return text.encode("utf-16-be")


def _gsm7_page(chunk: str) -> EncodedPage:
    n = len(chunk)
    padded = chunk + gsm7.SEPTET_TO_CHAR[gsm7.PAD_SEPTET] * (GSM7_CHARS_PER_PAGE - n)
    # 93 septets = 651 bits = 82 octets with 5 spare zero bits
    data = gsm7.pack(padded)
    assert len(data) == PAGE_DATA_OCTETS
    return EncodedPage(data=data, used_length=(7 * n + 7) // 8)


def _ucs2_page(chunk: str) -> EncodedPage:
    n = len(chunk)
    data = chunk.encode("utf-16-be") + UCS2_PAD_UNIT * (UCS2_UNITS_PER_PAGE - n)
    return EncodedPage(data=data, used_length=2 * n)


def paginate(payload: WarningPayload) -> EncodedWarning:
    """Split payload text greedily into full pages; raise MessageTooLong past 15."""
    payload.validate()
    per_page = GSM7_CHARS_PER_PAGE if payload.coding is Coding.GSM7 else UCS2_UNITS_PER_PAGE
    chunks = [payload.text[i:i + per_page] for i in range(0, len(payload.text), per_page)]
    if len(chunks) > MAX_PAGES:
        raise MessageTooLong(len(chunks))
    make = _gsm7_page if payload.coding is Coding.GSM7 else _ucs2_page
    return EncodedWarning(
        message_identifier=payload.message_identifier,
        serial_number=payload.serial_number,
        dcs_octet=DCS_BY_CODING[payload.coding],
        pages=tuple(make(c) for c in chunks),
    )


def serialize_pages(warning: EncodedWarning) -> bytes:
    """Length-prefixed page blocks, 83 octets each."""
    out = bytearray()
    for p in warning.pages:
        out.append(p.used_length)
        out += p.data
    return bytes(out)


def parse_pages(blob: bytes) -> tuple[EncodedPage, ...]:
    if len(blob) % PAGE_BLOCK_OCTETS != 0:
        raise FramingError("page block stream is not a whole number of blocks")
    pages = []
    for off in range(0, len(blob), PAGE_BLOCK_OCTETS):
        used = blob[off]
        if not (1 <= used <= PAGE_DATA_OCTETS):
            raise FramingError(f"bad page used_length {used}")
        pages.append(EncodedPage(data=blob[off + 1:off + PAGE_BLOCK_OCTETS], used_length=used))
    if not pages:
        raise FramingError("empty page block stream")
    return tuple(pages)


def segment(warning: EncodedWarning, si_budget: int = DEFAULT_SI_BUDGET) -> list[Sib8Segment]:
    """Slice the page block stream into segments fitting si_budget when framed."""
    blocks_per_segment = (si_budget - FRAME_OVERHEAD) // PAGE_BLOCK_OCTETS
    if blocks_per_segment < 1:
        raise BudgetTooSmall(si_budget)
    blob = serialize_pages(warning)
    step = blocks_per_segment * PAGE_BLOCK_OCTETS
    slices = [blob[i:i + step] for i in range(0, len(blob), step)]
    segments = []
    for num, chunk in enumerate(slices):
        segments.append(Sib8Segment(
            message_identifier=warning.message_identifier,
            serial_number=warning.serial_number,
            segment_number=num,
            is_last=(num == len(slices) - 1),
            dcs_octet=warning.dcs_octet if num == 0 else None,
            segment_bytes=chunk,
        ))
    return segments


def segment_raw(message_identifier: int, serial_number: int, dcs_octet: int,
                blob: bytes, si_budget: int = DEFAULT_SI_BUDGET) -> list[Sib8Segment]:
    """Slice an arbitrary page-block blob, skipping page-count validation.

    Lets tests push streams a conforming sender would refuse, e.g. more
    than 15 pages, to observe receiver-side rejection.
    """
    blocks_per_segment = (si_budget - FRAME_OVERHEAD) // PAGE_BLOCK_OCTETS
    if blocks_per_segment < 1:
        raise BudgetTooSmall(si_budget)
    step = blocks_per_segment * PAGE_BLOCK_OCTETS
    slices = [blob[i:i + step] for i in range(0, len(blob), step)]
    return [
        Sib8Segment(
            message_identifier=message_identifier,
            serial_number=serial_number,
            segment_number=num,
            is_last=(num == len(slices) - 1),
            dcs_octet=dcs_octet if num == 0 else None,
            segment_bytes=chunk,
        )
        for num, chunk in enumerate(slices)
    ]


FLAG_IS_LAST = 0x01
FLAG_DCS_PRESENT = 0x02


def frame_segment(seg: Sib8Segment) -> bytes:
    """Bit-exact wire form, big-endian throughout."""
    flags = (FLAG_IS_LAST if seg.is_last else 0) | (FLAG_DCS_PRESENT if seg.dcs_octet is not None else 0)
    head = struct.pack(">HHB", seg.message_identifier, seg.serial_number, flags)
    if seg.dcs_octet is not None:
        head += struct.pack(">B", seg.dcs_octet)
    head += struct.pack(">HHH", seg.segment_number, len(seg.segment_bytes), 0)
    return head + seg.segment_bytes


def parse_frame(body: bytes) -> Sib8Segment:
    if len(body) < 11:
        raise FramingError("frame shorter than minimum header")
    ident, serial, flags = struct.unpack(">HHB", body[:5])
    off = 5
    dcs = None
    if flags & FLAG_DCS_PRESENT:
        if len(body) < 12:
            raise FramingError("truncated coding octet")
        dcs = body[5]
        off = 6
    seg_num, payload_len, reserved = struct.unpack(">HHH", body[off:off + 6])
    off += 6
    if reserved != 0:
        raise FramingError("reserved field must be zero")
    payload = body[off:]
    if len(payload) != payload_len:
        raise FramingError(f"payload length {len(payload)} does not match header {payload_len}")
    if (dcs is not None) != (seg_num == 0):
        raise FramingError("coding octet presence must match segment number 0")
    return Sib8Segment(
        message_identifier=ident,
        serial_number=serial,
        segment_number=seg_num,
        is_last=bool(flags & FLAG_IS_LAST),
        dcs_octet=dcs,
        segment_bytes=payload,
    )


def build_si_message(si_index: int, seg: Sib8Segment) -> SiMessage:
    return SiMessage(si_index=si_index, body=frame_segment(seg))


def reassemble(segments: list[Sib8Segment]) -> EncodedWarning:
    """Order-independent reassembly.  Duplicates must be byte-identical."""
    if not segments:
        raise Incomplete([0])
    key = (segments[0].message_identifier, segments[0].serial_number)
    by_number: dict[int, Sib8Segment] = {}
    for s in segments:
        if (s.message_identifier, s.serial_number) != key:
            raise ConflictingSegments("segments from different warnings")
        prev = by_number.get(s.segment_number)
        if prev is not None:
            if prev.segment_bytes != s.segment_bytes or prev.is_last != s.is_last or prev.dcs_octet != s.dcs_octet:
                raise ConflictingSegments(f"segment {s.segment_number} seen with different content")
            continue
        by_number[s.segment_number] = s
    last = [n for n, s in by_number.items() if s.is_last]
    if len(last) > 1:
        raise ConflictingSegments("multiple segments marked last")
    if not last:
        raise Incomplete([max(by_number) + 1])
    highest = last[0]
    if highest != max(by_number):
        raise ConflictingSegments("segment numbered past the one marked last")
    missing = [n for n in range(highest + 1) if n not in by_number]
    if missing:
        raise Incomplete(missing)
    dcs = by_number[0].dcs_octet
    assert dcs is not None
    blob = b"".join(by_number[n].segment_bytes for n in range(highest + 1))
    return EncodedWarning(
        message_identifier=key[0],
        serial_number=key[1],
        dcs_octet=dcs,
        pages=parse_pages(blob),
    )


def _decode_gsm7_page(page: EncodedPage) -> str:
    n_max = (8 * page.used_length) // 7
    chars = gsm7.unpack(page.data[:page.used_length], n_max)
    # When the used octet count admits two character counts, the extra
    # position holds the CR filler; strip it.  A message genuinely ending
    # in CR at such a boundary is not representable, as in real cell
    # broadcast practice.
    ambiguous = n_max > 1 and (7 * (n_max - 1) + 7) // 8 == page.used_length
    if ambiguous and chars.endswith("\r"):
        return chars[:-1]
    return chars


def _decode_ucs2_page(page: EncodedPage) -> str:
    if page.used_length % 2 != 0:
        raise FramingError("16-bit coding requires an even used_length")
    return page.data[:page.used_length].decode("utf-16-be")


def decode_text(warning: EncodedWarning) -> str:
    coding = CODING_BY_DCS.get(warning.dcs_octet)
    if coding is None:
        raise UnknownDcs(warning.dcs_octet)
    decode = _decode_gsm7_page if coding is Coding.GSM7 else _decode_ucs2_page
    return "".join(decode(p) for p in warning.pages)


def content_hash(warning: EncodedWarning) -> str:
    """SHA-256 over identifier, serial, coding octet and meaningful page bytes.

    Independent of how the warning was segmented for transport.
    """
    h = hashlib.sha256()
    h.update(struct.pack(">HH", warning.message_identifier, warning.serial_number))
    h.update(bytes([warning.dcs_octet]))
    for p in warning.pages:
        h.update(p.data[:p.used_length])
    return h.hexdigest()


def hex_dump(data: bytes) -> str:
    """Lowercase hex, one space between octets."""
    return " ".join(f"{b:02x}" for b in data)


def detect_coding(text: str) -> Coding:
    """Pick the 7-bit alphabet when the whole text fits it, else 16-bit."""
    return Coding.GSM7 if gsm7.is_encodable(text) else Coding.UCS2
