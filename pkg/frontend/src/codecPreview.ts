/**
 * Client-side mirror of the testbed's warning-text capacity math.
 *
 * The composer needs to show coding, page count and segment count while the
 * operator types, before anything is sent.  The numbers here must agree with
 * what the server will do with the same text, so the constants below are
 * copied from the backend codec and the unit tests pin them.
 */

// 7-bit default alphabet, index = septet value.  Base table only, no
// extension escapes, which matches the server: any character outside this
// set forces the 16-bit coding.
export const GSM7_ALPHABET =
  "@£$¥èéùìòç\nØø\r" +
  "ÅåΔ_ΦΓΛΩΠΨΣΘ" +
  "Ξ ÆæßÉ !\"#¤%&'()*+,-./0123456789" +
  ":;<=>?¡ABCDEFGHIJKLMNOPQRSTUVWXYZÄÖÑÜ§" +
  "¿abcdefghijklmnopqrstuvwxyzäöñüà";

const GSM7_SET = new Set(GSM7_ALPHABET);

export const PAGE_DATA_OCTETS = 82;
export const MAX_PAGES = 15;
export const GSM7_UNITS_PER_PAGE = 93; // floor(82 * 8 / 7)
export const UCS2_UNITS_PER_PAGE = 41; // floor(82 / 2)

// One broadcast segment carries floor((budget - 12) / 83) page blocks.
const FRAME_OVERHEAD = 12;
const PAGE_BLOCK_OCTETS = 1 + PAGE_DATA_OCTETS;
export const DEFAULT_SI_BUDGET = 372;

export type Coding = "gsm7" | "ucs2";

export interface CodecPreview {
  coding: Coding;
  units: number;
  unitsPerPage: number;
  pages: number;
  segments: number;
  maxUnits: number;
  tooLong: boolean;
  encodable: boolean;
  notice: string | null;
}

export function isGsm7Encodable(text: string): boolean {
  for (const ch of text) {
    if (!GSM7_SET.has(ch)) return false;
  }
  return true;
}

/** UCS2 covers the BMP only: no astral code points, no lone surrogates. */
export function isUcs2Encodable(text: string): boolean {
  for (const ch of text) {
    const cp = ch.codePointAt(0)!;
    if (cp > 0xffff) return false;
    if (cp >= 0xd800 && cp <= 0xdfff) return false;
  }
  return true;
}

export function detectCoding(text: string): Coding {
  return isGsm7Encodable(text) ? "gsm7" : "ucs2";
}

function codingUnits(text: string, coding: Coding): number {
  if (coding === "gsm7") {
    let n = 0;
    for (const _ of text) n += 1; // code points == septets, base table is 1:1
    return n;
  }
  return text.length; // UTF-16 code units
}

export function blocksPerSegment(siBudget: number = DEFAULT_SI_BUDGET): number {
  return Math.floor((siBudget - FRAME_OVERHEAD) / PAGE_BLOCK_OCTETS);
}

/**
 * Compute what broadcasting `text` would produce.  `requested` mirrors the
 * composer's coding selector; "auto" picks 7-bit when the text allows it.
 */
export function preview(
  text: string,
  requested: Coding | "auto" = "auto",
  siBudget: number = DEFAULT_SI_BUDGET,
): CodecPreview {
  const coding = requested === "auto" ? detectCoding(text) : requested;
  const encodable =
    coding === "gsm7" ? isGsm7Encodable(text) : isUcs2Encodable(text);
  const unitsPerPage =
    coding === "gsm7" ? GSM7_UNITS_PER_PAGE : UCS2_UNITS_PER_PAGE;
  const units = codingUnits(text, coding);
  const pages = Math.max(1, Math.ceil(units / unitsPerPage));
  const perSegment = blocksPerSegment(siBudget);
  const segments = Math.ceil(pages / perSegment);
  const maxUnits = unitsPerPage * MAX_PAGES;
  const tooLong = pages > MAX_PAGES;

  let notice: string | null = null;
  if (!encodable) {
    notice =
      coding === "gsm7"
        ? "text has characters outside the 7-bit alphabet"
        : "text has characters outside the basic 16-bit plane";
  } else if (tooLong) {
    notice = `text needs ${pages} pages but a warning carries at most ${MAX_PAGES}`;
  }

  return {
    coding,
    units,
    unitsPerPage,
    pages,
    segments,
    maxUnits,
    tooLong,
    encodable,
    notice,
  };
}
