/**
 * Fine-tuning for the pair encoder on datasets in the builder's JSONL
 * format (train.jsonl / dev.jsonl next to each other). Binary
 * cross-entropy with Adam, batch size 4 and learning rate 5.5e-6 by
 * default, dev accuracy logged after every epoch, and training stops the
 * first time dev accuracy declines; the checkpoint written is the one
 * with the best dev accuracy seen.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { encodePair } from "./features.js";
import { ModelConfig, DEFAULT_CONFIG, PairEncoder } from "./model.js";

export interface Example {
  id: string;
  prefix: string;
  postfix: string;
  label: "branch" | "no_branch";
}

export interface Hyperparams {
  batchSize: number;
  learningRate: number;
  maxEpochs: number;
  seed: number;
  model: ModelConfig;
}

export const DEFAULT_HYPERPARAMS: Hyperparams = {
  batchSize: 4,
  learningRate: 5.5e-6,
  maxEpochs: 4,
  seed: 7,
  model: DEFAULT_CONFIG,
};

export interface EpochLog {
  epoch: number;
  trainLoss: number;
  devAccuracy: number;
}

export interface TrainResult {
  modelPath: string;
  log: EpochLog[];
  stoppedEarly: boolean;
}

export function readExamples(file: string): Example[] {
  const out: Example[] = [];
  const lines = fs.readFileSync(file, "utf-8").split("\n");
  lines.forEach((line, i) => {
    const trimmed = line.trim();
    if (!trimmed) return;
    let rec: any;
    try {
      rec = JSON.parse(trimmed);
    } catch (e) {
      throw new Error(`${file}:${i + 1}: invalid JSON`);
    }
    for (const field of ["id", "prefix", "postfix", "label"]) {
      if (typeof rec[field] !== "string") {
        throw new Error(`${file}:${i + 1}: missing string field ${field}`);
      }
    }
    if (rec.label !== "branch" && rec.label !== "no_branch") {
      throw new Error(`${file}:${i + 1}: bad label ${rec.label}`);
    }
    out.push({ id: rec.id, prefix: rec.prefix, postfix: rec.postfix, label: rec.label });
  });
  return out;
}

/** Deterministic in-place shuffle (LCG), independent of tfjs RNG state. */
function shuffle<T>(items: T[], seed: number): void {
  let state = (seed >>> 0) || 1;
  const next = () => {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0;
    return state / 4294967296;
  };
  for (let i = items.length - 1; i > 0; i--) {
    const j = Math.floor(next() * (i + 1));
    [items[i], items[j]] = [items[j], items[i]];
  }
}

function encodeExamples(model: PairEncoder, examples: Example[]) {
  return examples.map((e) => ({
    pair: encodePair(e.prefix, e.postfix, model.config.maxSeq, model.config.vocabSize),
    y: e.label === "branch" ? 1 : 0,
  }));
}

async function accuracy(model: PairEncoder, data: ReturnType<typeof encodeExamples>): Promise<number> {
  if (data.length === 0) return 0;
  let correct = 0;
  const batchSize = 16;
  for (let i = 0; i < data.length; i += batchSize) {
    const batch = data.slice(i, i + batchSize);
    const [ids, mask, segments] = model.encodeBatch(batch.map((d) => d.pair));
    const probs = Array.from(await model.forward(ids, mask, segments).data());
    ids.dispose();
    mask.dispose();
    segments.dispose();
    batch.forEach((d, j) => {
      if ((probs[j] >= 0.5 ? 1 : 0) === d.y) correct += 1;
    });
  }
  return correct / data.length;
}

export async function finetune(
  dataDir: string,
  outPath: string,
  hyper: Hyperparams = DEFAULT_HYPERPARAMS,
): Promise<TrainResult> {
  const trainFile = path.join(dataDir, "train.jsonl");
  const devFile = path.join(dataDir, "dev.jsonl");
  for (const file of [trainFile, devFile]) {
    if (!fs.existsSync(file)) throw new Error(`missing split file ${file}`);
  }
  const trainExamples = readExamples(trainFile);
  const devExamples = readExamples(devFile);
  if (trainExamples.length === 0) throw new Error("training split is empty");

  const model = new PairEncoder(hyper.model);
  const trainData = encodeExamples(model, trainExamples);
  const devData = encodeExamples(model, devExamples);
  const optimizer = tf.train.adam(hyper.learningRate);
  const variables = model.trainableVariables();

  const log: EpochLog[] = [];
  let best: { acc: number; weights: Map<string, tf.Tensor> } | null = null;
  let stoppedEarly = false;

  for (let epoch = 1; epoch <= hyper.maxEpochs; epoch++) {
    const order = trainData.map((_, i) => i);
    shuffle(order, hyper.seed + epoch);

    let lossSum = 0;
    let steps = 0;
    for (let start = 0; start < order.length; start += hyper.batchSize) {
      const batch = order.slice(start, start + hyper.batchSize).map((i) => trainData[i]);
      const [ids, mask, segments] = model.encodeBatch(batch.map((d) => d.pair));
      const ys = tf.tensor1d(batch.map((d) => d.y), "float32");
      const value = optimizer.minimize(
        () => {
          const probs = model.forward(ids, mask, segments);
          const eps = 1e-7;
          const clipped = probs.clipByValue(eps, 1 - eps);
          return tf
            .neg(
              ys.mul(clipped.log()).add(tf.scalar(1).sub(ys).mul(tf.scalar(1).sub(clipped).log())),
            )
            .mean() as tf.Scalar;
        },
        true,
        variables,
      );
      const lossValue = value ? (await value.data())[0] : Number.NaN;
      if (!Number.isFinite(lossValue)) {
        throw new Error(`non-finite loss at epoch ${epoch}`);
      }
      lossSum += lossValue;
      steps += 1;
      value?.dispose();
      ids.dispose();
      mask.dispose();
      segments.dispose();
      ys.dispose();
    }

    const devAccuracy = await accuracy(model, devData);
    log.push({ epoch, trainLoss: lossSum / Math.max(steps, 1), devAccuracy });

    if (best === null || devAccuracy >= best.acc) {
      if (best) for (const t of best.weights.values()) t.dispose();
      const snapshot = new Map<string, tf.Tensor>();
      for (const [name, variable] of model.weights) snapshot.set(name, variable.clone());
      best = { acc: devAccuracy, weights: snapshot };
    } else {
      stoppedEarly = true; // first decline in dev accuracy
      break;
    }
  }

  if (best) {
    for (const [name, tensor] of best.weights) model.w(name).assign(tensor as tf.Tensor);
    for (const t of best.weights.values()) t.dispose();
  }

  const checkpoint = await model.toCheckpoint();
  fs.mkdirSync(path.dirname(outPath), { recursive: true });
  fs.writeFileSync(outPath, JSON.stringify(checkpoint) + "\n", "utf-8");
  const logPath = outPath.replace(/\.json$/, "") + ".train_log.json";
  fs.writeFileSync(logPath, JSON.stringify({ hyper, log, stoppedEarly }, null, 2) + "\n", "utf-8");
  return { modelPath: outPath, log, stoppedEarly };
}
