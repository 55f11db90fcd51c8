#!/usr/bin/env node
/**
 * chadpod-bridge CLI.
 *
 *   chadpod-bridge serve --model <checkpoint.json> [--name <server name>]
 *   chadpod-bridge finetune --data <dataset dir> --out <checkpoint.json>
 *       [--batch-size 4] [--lr 5.5e-6] [--max-epochs 4] [--seed 7]
 *       [--vocab-size 2048] [--max-seq 64] [--embed-dim 32]
 *       [--num-heads 2] [--ff-dim 64] [--num-blocks 2]
 */

import { DEFAULT_CONFIG } from "./model.js";
import { serveModel } from "./serve.js";
import { DEFAULT_HYPERPARAMS, finetune } from "./train.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad arguments near ${key}`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

function num(flags: Map<string, string>, key: string, fallback: number): number {
  const raw = flags.get(key);
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isFinite(value)) throw new Error(`--${key} must be a number`);
  return value;
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  if (command === "serve") {
    const flags = parseFlags(rest);
    const modelPath = flags.get("model");
    if (!modelPath) {
      process.stderr.write("serve requires --model <checkpoint.json>\n");
      return 1;
    }
    await serveModel({ modelPath, name: flags.get("name") });
    return 0;
  }
  if (command === "finetune") {
    const flags = parseFlags(rest);
    const data = flags.get("data");
    const out = flags.get("out");
    if (!data || !out) {
      process.stderr.write("finetune requires --data <dir> and --out <checkpoint.json>\n");
      return 1;
    }
    const result = await finetune(data, out, {
      batchSize: num(flags, "batch-size", DEFAULT_HYPERPARAMS.batchSize),
      learningRate: num(flags, "lr", DEFAULT_HYPERPARAMS.learningRate),
      maxEpochs: num(flags, "max-epochs", DEFAULT_HYPERPARAMS.maxEpochs),
      seed: num(flags, "seed", DEFAULT_HYPERPARAMS.seed),
      model: {
        vocabSize: num(flags, "vocab-size", DEFAULT_CONFIG.vocabSize),
        maxSeq: num(flags, "max-seq", DEFAULT_CONFIG.maxSeq),
        embedDim: num(flags, "embed-dim", DEFAULT_CONFIG.embedDim),
        numHeads: num(flags, "num-heads", DEFAULT_CONFIG.numHeads),
        ffDim: num(flags, "ff-dim", DEFAULT_CONFIG.ffDim),
        numBlocks: num(flags, "num-blocks", DEFAULT_CONFIG.numBlocks),
        seed: num(flags, "seed", DEFAULT_CONFIG.seed),
      },
    });
    for (const entry of result.log) {
      process.stderr.write(
        `epoch ${entry.epoch}: train loss ${entry.trainLoss.toFixed(4)}, ` +
          `dev accuracy ${entry.devAccuracy.toFixed(4)}\n`,
      );
    }
    if (result.stoppedEarly) {
      process.stderr.write("stopped on first dev-accuracy decline\n");
    }
    process.stderr.write(`wrote ${result.modelPath}\n`);
    return 0;
  }
  process.stderr.write("usage: chadpod-bridge <serve|finetune> [flags]\n");
  return 1;
}

main().then(
  (code) => {
    process.exitCode = code;
  },
  (err) => {
    process.stderr.write(`chadpod-bridge: ${err?.message ?? err}\n`);
    process.exitCode = 2;
  },
);
