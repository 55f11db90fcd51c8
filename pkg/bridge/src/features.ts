/**
 * Deterministic tokenization for the pair encoder: lowercase word/punct
 * tokens hashed into a fixed vocabulary, with middle truncation that
 * keeps the text adjacent to the prefix/postfix boundary.
 */

export const PAD_ID = 0;
export const CLS_ID = 1;
export const SEP_ID = 2;
export const RESERVED = 3;

const TOKEN_RE = /[a-z0-9']+|[^\sa-z0-9']/g;

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? [];
}

/** FNV-1a 32-bit over UTF-8 code units; stable across runs and platforms. */
export function fnv1a32(s: string): number {
  let h = 0x811c9dc5;
  const bytes = Buffer.from(s, "utf-8");
  for (const b of bytes) {
    h ^= b;
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

export function tokenId(token: string, vocabSize: number): number {
  return RESERVED + (fnv1a32(token) % (vocabSize - RESERVED));
}

/**
 * Drop tokens from the middle of a segment so at most `budget` remain,
 * keeping the head and the tail. Both ends survive, so whichever end
 * touches the pair boundary is preserved.
 */
export function truncateMiddle<T>(tokens: T[], budget: number): T[] {
  if (tokens.length <= budget) return tokens;
  const head = Math.ceil(budget / 2);
  const tail = budget - head;
  return tokens.slice(0, head).concat(tail > 0 ? tokens.slice(-tail) : []);
}

export interface EncodedPair {
  ids: number[]; // length maxSeq, PAD-filled
  /** 1 for real tokens, 0 for padding. */
  mask: number[];
  /** 0 for [CLS]+prefix(+SEP), 1 for postfix(+SEP). */
  segments: number[];
}

/** [CLS] prefix [SEP] postfix [SEP], padded to maxSeq. */
export function encodePair(
  prefix: string,
  postfix: string,
  maxSeq: number,
  vocabSize: number,
): EncodedPair {
  const budget = Math.floor((maxSeq - 3) / 2);
  const pre = truncateMiddle(tokenize(prefix), budget);
  const post = truncateMiddle(tokenize(postfix), budget);

  const ids: number[] = [CLS_ID];
  const segments: number[] = [0];
  for (const t of pre) {
    ids.push(tokenId(t, vocabSize));
    segments.push(0);
  }
  ids.push(SEP_ID);
  segments.push(0);
  for (const t of post) {
    ids.push(tokenId(t, vocabSize));
    segments.push(1);
  }
  ids.push(SEP_ID);
  segments.push(1);

  const mask = new Array(ids.length).fill(1);
  while (ids.length < maxSeq) {
    ids.push(PAD_ID);
    mask.push(0);
    segments.push(0);
  }
  return { ids, mask, segments };
}
