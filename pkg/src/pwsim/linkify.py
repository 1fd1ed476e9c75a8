"""Span detection over displayed alert text.

Reproduces how handsets turn warning text into tappable links: scheme
URLs, schemeless domains ending in a known TLD, email addresses, phone
numbers and US-style street addresses.  Detection is pure string work on
the original text; spans never overlap and always index the input.

Cyrillic look-alike characters are folded to their Latin twins for TLD
matching, mirroring handsets that accept homoglyph URLs.  Spans holding
any Cyrillic are tagged so callers can drop or flag them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources


class SpanKind(Enum):
    WEB_URL = "WebUrl"
    EMAIL = "Email"
    PHONE = "Phone"
    MAP_ADDRESS = "MapAddress"


@dataclass(frozen=True)
class ParsedSpan:
    kind: SpanKind
    start: int
    end: int
    contains_cyrillic: bool

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError("span must be non-empty with start < end")


@dataclass(frozen=True)
class ParserProfileFlags:
    cyrillic_url_clickable: bool = False


# Cyrillic letters visually identical to Latin ones in common UI fonts.
HOMOGLYPHS = {
    "а": "a", "е": "e", "о": "o", "р": "p",
    "с": "c", "у": "y", "х": "x", "к": "k",
    "м": "m", "т": "t", "в": "b", "н": "h",
    "і": "i", "ј": "j", "ѕ": "s", "ԁ": "d",
    "ԛ": "q", "ԝ": "w",
    "А": "A", "В": "B", "Е": "E", "К": "K",
    "М": "M", "Н": "H", "О": "O", "Р": "P",
    "С": "C", "Т": "T", "У": "Y", "Х": "X",
}


def fold_homoglyphs(s: str) -> str:
    return "".join(HOMOGLYPHS.get(c, c) for c in s)


def has_cyrillic(s: str) -> bool:
    return any("Ѐ" <= c <= "ӿ" for c in s)


def load_tld_file(path) -> frozenset[str]:
    tlds = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                tlds.add(line.lower())
    return frozenset(tlds)


_default_tlds: frozenset[str] | None = None


def default_tlds() -> frozenset[str]:
    global _default_tlds
    if _default_tlds is None:
        text = resources.files("pwsim").joinpath("data/tlds.txt").read_text(encoding="utf-8")
        _default_tlds = frozenset(
            line.strip().lower()
            for line in text.splitlines()
            if line.strip() and not line.strip().startswith("#")
        )
    return _default_tlds


# tokens are split on whitespace and on < > " so markup never joins text
_TOKEN_RE = re.compile(r'[^\s<>"]+')
_SCHEME_RE = re.compile(r"^(https?|rtsp|ftp)://", re.IGNORECASE)
_TRAIL_PUNCT = ".,!?"

_PHONE_RE = re.compile(r"(?<![0-9A-Za-z+])\+?[0-9](?:[ -]?[0-9]){6,14}(?![0-9A-Za-z])")
_ADDRESS_RE = re.compile(
    r"\b[0-9]{1,5} (?:[A-Z][A-Za-z]* )+(?:St|Ave|Blvd|Rd|Dr|Ln|Way)\b"
    r"(?:, [A-Z][A-Za-z]*(?: [A-Z][A-Za-z]*)*, [A-Z]{2} [0-9]{5}(?:-[0-9]{4})?)?"
)
_EMAIL_LOCAL_RE = re.compile(r"^[A-Za-z0-9._%+-]+$")


def _trim_trailing(text: str, start: int, end: int) -> int:
    while end > start and text[end - 1] in _TRAIL_PUNCT:
        end -= 1
    return end


def _domain_tld(candidate: str, tlds: frozenset[str]) -> bool:
    """True iff candidate ends with .<listed TLD> and has a non-dot char before.

    candidate is already homoglyph-folded and lowercased.
    """
    dot = candidate.rfind(".")
    if dot <= 0 or candidate[dot - 1] == ".":
        return False
    return candidate[dot + 1:] in tlds


# collection priority: scheme URLs dominate, then emails, schemeless
# domains, street addresses, phone numbers
_PRI_SCHEME, _PRI_EMAIL, _PRI_BARE, _PRI_ADDRESS, _PRI_PHONE = range(5)


def parse_content(text: str, flags: ParserProfileFlags = ParserProfileFlags(),
                  tlds: frozenset[str] | None = None) -> list[ParsedSpan]:
    """Detect link spans in alert text.  Deterministic, offsets into text."""
    if tlds is None:
        tlds = default_tlds()
    candidates: list[tuple[int, int, int, SpanKind]] = []

    for tok in _TOKEN_RE.finditer(text):
        t_start, t_end = tok.start(), tok.end()
        raw = tok.group()
        m = _SCHEME_RE.match(raw)
        if m:
            end = _trim_trailing(text, t_start, t_end)
            # a bare scheme with nothing after :// is not a link
            if end - t_start > m.end():
                candidates.append((_PRI_SCHEME, t_start, end, SpanKind.WEB_URL))
            continue
        end = _trim_trailing(text, t_start, t_end)
        if end <= t_start:
            continue
        token = text[t_start:end]
        if "@" in token:
            local, _, domain = token.rpartition("@")
            if local and _EMAIL_LOCAL_RE.match(local) and \
                    _domain_tld(fold_homoglyphs(domain).lower(), tlds):
                candidates.append((_PRI_EMAIL, t_start, end, SpanKind.EMAIL))
            continue
        if _domain_tld(fold_homoglyphs(token).lower(), tlds):
            candidates.append((_PRI_BARE, t_start, end, SpanKind.WEB_URL))

    for m in _ADDRESS_RE.finditer(text):
        candidates.append((_PRI_ADDRESS, m.start(), m.end(), SpanKind.MAP_ADDRESS))
    for m in _PHONE_RE.finditer(text):
        candidates.append((_PRI_PHONE, m.start(), m.end(), SpanKind.PHONE))

    candidates.sort(key=lambda c: (c[0], c[1], -(c[2] - c[1])))
    accepted: list[tuple[int, int, SpanKind]] = []
    for _pri, start, end, kind in candidates:
        if any(start < a_end and a_start < end for a_start, a_end, _ in accepted):
            continue
        accepted.append((start, end, kind))

    spans = []
    for start, end, kind in sorted(accepted):
        cyr = has_cyrillic(text[start:end])
        if cyr and not flags.cyrillic_url_clickable:
            continue
        spans.append(ParsedSpan(kind=kind, start=start, end=end, contains_cyrillic=cyr))
    return spans


def span_text(text: str, span: ParsedSpan) -> str:
    return text[span.start:span.end]


def spans_to_json(spans: list[ParsedSpan]) -> list[dict]:
    return [
        {"kind": s.kind.value, "start": s.start, "end": s.end,
         "contains_cyrillic": s.contains_cyrillic}
        for s in spans
    ]
