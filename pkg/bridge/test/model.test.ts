import { describe, expect, it } from "vitest";

import { PairEncoder } from "../src/model.js";

const TINY = {
  vocabSize: 256,
  maxSeq: 24,
  embedDim: 16,
  numHeads: 2,
  ffDim: 24,
  numBlocks: 1,
  seed: 99,
};

const PAIRS = [
  { prefix: "The door stood open at last.", postfix: "She walked through without a word." },
  { prefix: "Rain kept the square empty.", postfix: "A single lamp burned in the arcade." },
];

describe("PairEncoder", () => {
  it("scores are probabilities", async () => {
    const model = new PairEncoder(TINY);
    const probs = await model.scorePairs(PAIRS);
    expect(probs).toHaveLength(2);
    for (const p of probs) {
      expect(p).toBeGreaterThan(0);
      expect(p).toBeLessThan(1);
    }
  });

  it("same seed builds the same model", async () => {
    const a = await new PairEncoder(TINY).scorePairs(PAIRS);
    const b = await new PairEncoder(TINY).scorePairs(PAIRS);
    expect(a).toEqual(b);
  });

  it("scoring is deterministic within one model", async () => {
    const model = new PairEncoder(TINY);
    const a = await model.scorePairs(PAIRS);
    const b = await model.scorePairs(PAIRS);
    expect(a).toEqual(b);
  });

  it("checkpoint round-trip preserves scores", async () => {
    const model = new PairEncoder(TINY);
    const checkpoint = await model.toCheckpoint();
    const reloaded = PairEncoder.fromCheckpoint(JSON.parse(JSON.stringify(checkpoint)));
    const a = await model.scorePairs(PAIRS);
    const b = await reloaded.scorePairs(PAIRS);
    // JSON stores float64 of float32 values exactly.
    expect(b).toEqual(a);
  });

  it("rejects foreign checkpoints", () => {
    expect(() => PairEncoder.fromCheckpoint({ format: "other" })).toThrow(/not a bridge/);
  });

  it("rejects head/dim mismatch", () => {
    expect(() => new PairEncoder({ ...TINY, embedDim: 15 })).toThrow(/divisible/);
  });
});
