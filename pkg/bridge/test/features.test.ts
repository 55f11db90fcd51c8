import { describe, expect, it } from "vitest";

import {
  CLS_ID,
  PAD_ID,
  RESERVED,
  SEP_ID,
  encodePair,
  fnv1a32,
  tokenId,
  tokenize,
  truncateMiddle,
} from "../src/features.js";

describe("tokenize", () => {
  it("lowercases and splits words from punctuation", () => {
    expect(tokenize("She left. Then ran!")).toEqual(["she", "left", ".", "then", "ran", "!"]);
  });

  it("keeps apostrophes inside words", () => {
    expect(tokenize("don't stop")).toEqual(["don't", "stop"]);
  });

  it("empty input", () => {
    expect(tokenize("")).toEqual([]);
  });
});

describe("fnv1a32", () => {
  it("matches the published FNV-1a test vectors", () => {
    expect(fnv1a32("")).toBe(0x811c9dc5);
    expect(fnv1a32("a")).toBe(0xe40c292c);
  });

  it("token ids avoid the reserved range", () => {
    for (const token of ["a", "the", "zephyr", "!", "42"]) {
      const id = tokenId(token, 512);
      expect(id).toBeGreaterThanOrEqual(RESERVED);
      expect(id).toBeLessThan(512);
    }
  });
});

describe("truncateMiddle", () => {
  it("keeps short inputs unchanged", () => {
    expect(truncateMiddle([1, 2, 3], 5)).toEqual([1, 2, 3]);
  });

  it("drops the middle, preserving both ends", () => {
    const tokens = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
    expect(truncateMiddle(tokens, 4)).toEqual([0, 1, 8, 9]);
    expect(truncateMiddle(tokens, 5)).toEqual([0, 1, 2, 8, 9]);
  });

  it("budget one keeps only the head", () => {
    expect(truncateMiddle([7, 8, 9], 1)).toEqual([7]);
  });
});

describe("encodePair", () => {
  it("lays out [CLS] prefix [SEP] postfix [SEP] with padding", () => {
    const { ids, mask, segments } = encodePair("one two", "three", 12, 512);
    expect(ids).toHaveLength(12);
    expect(ids[0]).toBe(CLS_ID);
    const seps = ids.filter((id) => id === SEP_ID);
    expect(seps).toHaveLength(2);
    const realLen = 1 + 2 + 1 + 1 + 1; // cls, two prefix, sep, one postfix, sep
    expect(mask.slice(0, realLen).every((m) => m === 1)).toBe(true);
    expect(mask.slice(realLen).every((m) => m === 0)).toBe(true);
    expect(ids.slice(realLen).every((id) => id === PAD_ID)).toBe(true);
    expect(segments[0]).toBe(0);
    expect(segments[realLen - 1]).toBe(1);
  });

  it("long segments get middle-truncated, boundary text preserved", () => {
    const prefix = Array.from({ length: 100 }, (_, i) => `pre${i}`).join(" ") + " boundarytail";
    const postfix = "boundaryhead " + Array.from({ length: 100 }, (_, i) => `post${i}`).join(" ");
    const { ids, mask } = encodePair(prefix, postfix, 32, 2048);
    expect(ids).toHaveLength(32);
    expect(mask.reduce((a, b) => a + b, 0)).toBeLessThanOrEqual(32);
    // The boundary-adjacent tokens survive truncation.
    expect(ids).toContain(tokenId("boundarytail", 2048));
    expect(ids).toContain(tokenId("boundaryhead", 2048));
    // So do both far ends.
    expect(ids).toContain(tokenId("pre0", 2048));
    expect(ids).toContain(tokenId("post99", 2048));
  });

  it("is deterministic", () => {
    expect(encodePair("a b c", "d e", 16, 256)).toEqual(encodePair("a b c", "d e", 16, 256));
  });
});
