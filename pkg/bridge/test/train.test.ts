import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { PairEncoder } from "../src/model.js";
import { finetune, readExamples } from "../src/train.js";
import { writeSmokeDataset } from "./helpers.js";

const TINY_MODEL = {
  vocabSize: 512,
  maxSeq: 32,
  embedDim: 16,
  numHeads: 2,
  ffDim: 24,
  numBlocks: 1,
  seed: 3,
};

let workDir: string;

beforeAll(() => {
  workDir = fs.mkdtempSync(path.join(os.tmpdir(), "bridge-train-"));
  writeSmokeDataset(path.join(workDir, "smoke"));
});

afterAll(() => {
  fs.rmSync(workDir, { recursive: true, force: true });
});

describe("readExamples", () => {
  it("reads the builder JSONL format", () => {
    const rows = readExamples(path.join(workDir, "smoke", "train.jsonl"));
    expect(rows).toHaveLength(28);
    expect(rows[0].label).toBe("branch");
  });

  it("rejects bad labels", () => {
    const bad = path.join(workDir, "bad.jsonl");
    fs.writeFileSync(
      bad,
      JSON.stringify({ id: "x", prefix: "p", postfix: "q", label: "maybe" }) + "\n",
    );
    expect(() => readExamples(bad)).toThrow(/bad label/);
  });
});

describe("finetune smoke on the 40-example dataset", () => {
  it("completes at least one epoch with the reference hyperparameters and serves from the checkpoint", async () => {
    const out = path.join(workDir, "smoke-model.json");
    const result = await finetune(path.join(workDir, "smoke"), out, {
      batchSize: 4,
      learningRate: 5.5e-6,
      maxEpochs: 1,
      seed: 7,
      model: TINY_MODEL,
    });
    expect(result.log.length).toBeGreaterThanOrEqual(1);
    // Dev accuracy is logged for every epoch.
    for (const entry of result.log) {
      expect(entry.devAccuracy).toBeGreaterThanOrEqual(0);
      expect(entry.devAccuracy).toBeLessThanOrEqual(1);
      expect(Number.isFinite(entry.trainLoss)).toBe(true);
    }
    expect(fs.existsSync(out)).toBe(true);
    expect(fs.existsSync(out.replace(/\.json$/, "") + ".train_log.json")).toBe(true);

    const model = PairEncoder.fromCheckpoint(JSON.parse(fs.readFileSync(out, "utf-8")));
    const probs = await model.scorePairs([
      { prefix: "The road ran past the zephyr marker 1. It kept on going a while.",
        postfix: "Past the marker the land opened out 1. Nothing else changed yet." },
    ]);
    expect(probs[0]).toBeGreaterThanOrEqual(0);
    expect(probs[0]).toBeLessThanOrEqual(1);
  }, 120_000);

  it("learns the separable marker with a workable learning rate", async () => {
    const out = path.join(workDir, "sep-model.json");
    const result = await finetune(path.join(workDir, "smoke"), out, {
      batchSize: 4,
      learningRate: 0.005,
      maxEpochs: 8,
      seed: 7,
      model: TINY_MODEL,
    });
    const bestDev = Math.max(...result.log.map((e) => e.devAccuracy));
    expect(bestDev).toBeGreaterThan(0.5);
  }, 240_000);

  it("stops on the first dev-accuracy decline and keeps the best checkpoint", async () => {
    // Random labels make dev accuracy fluctuate, so a decline arrives
    // well before the epoch budget.
    const noisyDir = path.join(workDir, "noisy");
    fs.mkdirSync(noisyDir, { recursive: true });
    const row = (tag: string, i: number, label: string) =>
      JSON.stringify({
        id: `${tag}-${i}`,
        game: "g",
        prefix: `Some prefix sentence number ${i} with noise ${(i * 7) % 13}.`,
        postfix: `Some postfix sentence number ${i} with noise ${(i * 11) % 17}.`,
        label,
        kind: label === "branch" ? "positive" : "easy_neg",
      });
    const labels = (i: number) => ((i * 2654435761) % 3 === 0 ? "branch" : "no_branch");
    fs.writeFileSync(
      path.join(noisyDir, "train.jsonl"),
      Array.from({ length: 24 }, (_, i) => row("tr", i, labels(i))).join("\n") + "\n",
    );
    fs.writeFileSync(
      path.join(noisyDir, "dev.jsonl"),
      Array.from({ length: 16 }, (_, i) => row("dv", i, labels(i + 5))).join("\n") + "\n",
    );
    const result = await finetune(noisyDir, path.join(noisyDir, "model.json"), {
      batchSize: 4,
      learningRate: 0.05,
      maxEpochs: 25,
      seed: 11,
      model: TINY_MODEL,
    });
    if (result.stoppedEarly) {
      const last = result.log[result.log.length - 1];
      const bestBefore = Math.max(...result.log.slice(0, -1).map((e) => e.devAccuracy));
      expect(last.devAccuracy).toBeLessThan(bestBefore);
      expect(result.log.length).toBeLessThanOrEqual(25);
    } else {
      // The budget ran out without a decline; the log must then be full length.
      expect(result.log).toHaveLength(25);
    }
  }, 240_000);

  it("missing split file is an error", async () => {
    await expect(finetune(path.join(workDir, "nowhere"), path.join(workDir, "x.json"))).rejects.toThrow(
      /missing split/,
    );
  });
});
