"""7-bit default alphabet for broadcast text.

Only the 128-entry basic table is supported; escape-sequence extension
characters would occupy two septets and break the fixed 93 characters
per page capacity, so text needing them must use the UCS2 coding
instead.  Slot 0x1B holds NBSP, keeping the table a clean bijection.
"""

from __future__ import annotations

import numpy as np

from .kernels import pack_septets, unpack_septets

ALPHABET = (
    "@\xa3$\xa5\xe8\xe9\xf9\xec\xf2\xe7\n\xd8\xf8\r\xc5\xe5"
    "Δ_ΦΓΛΩΠΨΣΘΞ\xa0"
    "\xc6\xe6\xdf\xc9"
    " !\"#\xa4%&'()*+,-./"
    "0123456789:;<=>?"
    "\xa1ABCDEFGHIJKLMNOPQRSTUVWXYZ\xc4\xd6\xd1\xdc\xa7"
    "\xbfabcdefghijklmnopqrstuvwxyz\xe4\xf6\xf1\xfc\xe0"
)

assert len(ALPHABET) == 128

CHAR_TO_SEPTET = {c: i for i, c in enumerate(ALPHABET)}
SEPTET_TO_CHAR = {i: c for i, c in enumerate(ALPHABET)}

# padding filler, same convention as SMS cell broadcast
PAD_SEPTET = 0x0D


def is_encodable(text: str) -> bool:
    return all(c in CHAR_TO_SEPTET for c in text)


def to_septets(text: str) -> np.ndarray:
    """Map text to septet values; caller must have validated encodability."""
    return np.array([CHAR_TO_SEPTET[c] for c in text], dtype=np.uint8)


def from_septets(septets) -> str:
    return "".join(SEPTET_TO_CHAR[int(s)] for s in septets)


def pack(text: str) -> bytes:
    return pack_septets(to_septets(text))


def unpack(octets: bytes, count: int) -> str:
    return from_septets(unpack_septets(octets, count))
