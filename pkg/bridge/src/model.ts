/**
 * A small transformer encoder for sentence-pair classification, written
 * against raw tfjs ops so the weights live in a plain registry and the
 * checkpoint is an explicit JSON file.
 *
 * Layout per example: [CLS] prefix [SEP] postfix [SEP] with token,
 * position, and segment embeddings summed; pre-norm self-attention
 * blocks; the [CLS] vector feeds a sigmoid head, so every score is a
 * probability in (0, 1).
 */

import * as tf from "@tensorflow/tfjs";

import { EncodedPair, encodePair } from "./features.js";

export interface ModelConfig {
  vocabSize: number;
  maxSeq: number;
  embedDim: number;
  numHeads: number;
  ffDim: number;
  numBlocks: number;
  seed: number;
}

export const DEFAULT_CONFIG: ModelConfig = {
  vocabSize: 2048,
  maxSeq: 64,
  embedDim: 32,
  numHeads: 2,
  ffDim: 64,
  numBlocks: 2,
  seed: 12345,
};

export const CHECKPOINT_FORMAT = "chadpod-bridge-encoder";
export const CHECKPOINT_VERSION = 1;

let instanceCounter = 0;

export class PairEncoder {
  readonly config: ModelConfig;
  readonly weights = new Map<string, tf.Variable>();
  // tfjs registers variable names globally, so each instance prefixes its own.
  private readonly scope = `enc${instanceCounter++}`;

  constructor(config: ModelConfig) {
    if (config.embedDim % config.numHeads !== 0) {
      throw new Error("embedDim must be divisible by numHeads");
    }
    this.config = config;
    this.init();
  }

  private add(name: string, shape: number[], stddev: number, seedOffset: number): void {
    const init =
      stddev === 0
        ? tf.zeros(shape)
        : tf.randomNormal(shape, 0, stddev, "float32", this.config.seed + seedOffset);
    this.weights.set(name, tf.variable(init, true, `${this.scope}/${name}`));
  }

  private init(): void {
    const { vocabSize, maxSeq, embedDim, ffDim, numBlocks } = this.config;
    let seed = 1;
    this.add("tok_emb", [vocabSize, embedDim], 0.02, seed++);
    this.add("pos_emb", [maxSeq, embedDim], 0.02, seed++);
    this.add("seg_emb", [2, embedDim], 0.02, seed++);
    for (let b = 0; b < numBlocks; b++) {
      for (const side of ["q", "k", "v", "o"]) {
        this.add(`block${b}/attn_${side}_w`, [embedDim, embedDim], 0.02, seed++);
        this.add(`block${b}/attn_${side}_b`, [embedDim], 0, seed++);
      }
      this.add(`block${b}/ln1_g`, [embedDim], 0, seed++);
      this.w(`block${b}/ln1_g`).assign(tf.ones([embedDim]));
      this.add(`block${b}/ln1_b`, [embedDim], 0, seed++);
      this.add(`block${b}/ff1_w`, [embedDim, ffDim], 0.02, seed++);
      this.add(`block${b}/ff1_b`, [ffDim], 0, seed++);
      this.add(`block${b}/ff2_w`, [ffDim, embedDim], 0.02, seed++);
      this.add(`block${b}/ff2_b`, [embedDim], 0, seed++);
      this.add(`block${b}/ln2_g`, [embedDim], 0, seed++);
      this.w(`block${b}/ln2_g`).assign(tf.ones([embedDim]));
      this.add(`block${b}/ln2_b`, [embedDim], 0, seed++);
    }
    this.add("head_w", [embedDim, 1], 0.02, seed++);
    this.add("head_b", [1], 0, seed++);
  }

  w(name: string): tf.Variable {
    const v = this.weights.get(name);
    if (!v) throw new Error(`unknown weight ${name}`);
    return v;
  }

  private layerNorm(x: tf.Tensor3D, gamma: tf.Variable, beta: tf.Variable): tf.Tensor3D {
    const mean = x.mean(-1, true);
    const variance = x.sub(mean).square().mean(-1, true);
    const normed = x.sub(mean).div(variance.add(1e-5).sqrt());
    return normed.mul(gamma).add(beta) as tf.Tensor3D;
  }

  private attention(b: number, x: tf.Tensor3D, maskAdd: tf.Tensor): tf.Tensor3D {
    const { numHeads, embedDim } = this.config;
    const [batch, seq] = [x.shape[0], x.shape[1]];
    const dh = embedDim / numHeads;

    const proj = (side: string) =>
      x
        .reshape([batch * seq, embedDim])
        .matMul(this.w(`block${b}/attn_${side}_w`))
        .add(this.w(`block${b}/attn_${side}_b`))
        .reshape([batch, seq, numHeads, dh])
        .transpose([0, 2, 1, 3]); // [batch, heads, seq, dh]

    const q = proj("q");
    const k = proj("k");
    const v = proj("v");
    const scores = tf
      .matMul(q, k, false, true)
      .div(Math.sqrt(dh))
      .add(maskAdd); // [batch, heads, seq, seq]
    const att = tf.softmax(scores, -1);
    const ctx = tf
      .matMul(att, v)
      .transpose([0, 2, 1, 3])
      .reshape([batch * seq, embedDim]);
    return ctx
      .matMul(this.w(`block${b}/attn_o_w`))
      .add(this.w(`block${b}/attn_o_b`))
      .reshape([batch, seq, embedDim]) as tf.Tensor3D;
  }

  /** Probabilities for a batch of encoded pairs, shape [batch]. */
  forward(ids: tf.Tensor2D, mask: tf.Tensor2D, segments: tf.Tensor2D): tf.Tensor1D {
    return tf.tidy(() => {
      const { embedDim, numBlocks, maxSeq } = this.config;
      const batch = ids.shape[0];

      const tok = tf.gather(this.w("tok_emb"), ids.cast("int32"));
      const pos = this.w("pos_emb").reshape([1, maxSeq, embedDim]);
      const seg = tf.gather(this.w("seg_emb"), segments.cast("int32"));
      let x = tok.add(pos).add(seg) as tf.Tensor3D;

      // Additive mask: large negative on padded key positions.
      const maskAdd = mask
        .reshape([batch, 1, 1, maxSeq])
        .sub(1)
        .mul(1e9); // 0 for real, -1e9 for pad

      for (let b = 0; b < numBlocks; b++) {
        const normed1 = this.layerNorm(x, this.w(`block${b}/ln1_g`), this.w(`block${b}/ln1_b`));
        x = x.add(this.attention(b, normed1, maskAdd)) as tf.Tensor3D;
        const normed2 = this.layerNorm(x, this.w(`block${b}/ln2_g`), this.w(`block${b}/ln2_b`));
        const ff = normed2
          .reshape([batch * maxSeq, embedDim])
          .matMul(this.w(`block${b}/ff1_w`))
          .add(this.w(`block${b}/ff1_b`))
          .relu()
          .matMul(this.w(`block${b}/ff2_w`))
          .add(this.w(`block${b}/ff2_b`))
          .reshape([batch, maxSeq, embedDim]);
        x = x.add(ff) as tf.Tensor3D;
      }

      const cls = x.slice([0, 0, 0], [batch, 1, embedDim]).reshape([batch, embedDim]);
      const logits = cls.matMul(this.w("head_w")).add(this.w("head_b")).reshape([batch]);
      return tf.sigmoid(logits) as tf.Tensor1D;
    });
  }

  encodeBatch(pairs: EncodedPair[]): [tf.Tensor2D, tf.Tensor2D, tf.Tensor2D] {
    const ids = tf.tensor2d(pairs.map((p) => p.ids), undefined, "int32");
    const mask = tf.tensor2d(pairs.map((p) => p.mask), undefined, "float32");
    const segments = tf.tensor2d(pairs.map((p) => p.segments), undefined, "int32");
    return [ids, mask, segments];
  }

  /** Score (prefix, postfix) pairs; returns plain numbers in (0, 1). */
  async scorePairs(pairs: Array<{ prefix: string; postfix: string }>): Promise<number[]> {
    const encoded = pairs.map((p) =>
      encodePair(p.prefix, p.postfix, this.config.maxSeq, this.config.vocabSize),
    );
    const [ids, mask, segments] = this.encodeBatch(encoded);
    const probs = this.forward(ids, mask, segments);
    const data = Array.from(await probs.data());
    ids.dispose();
    mask.dispose();
    segments.dispose();
    probs.dispose();
    return data;
  }

  trainableVariables(): tf.Variable[] {
    return Array.from(this.weights.values());
  }

  async toCheckpoint(): Promise<object> {
    const weights: Record<string, { shape: number[]; data: number[] }> = {};
    for (const [name, variable] of this.weights) {
      weights[name] = {
        shape: variable.shape.slice(),
        data: Array.from(await variable.data()),
      };
    }
    return {
      format: CHECKPOINT_FORMAT,
      format_version: CHECKPOINT_VERSION,
      config: this.config,
      weights,
    };
  }

  static fromCheckpoint(obj: any): PairEncoder {
    if (obj?.format !== CHECKPOINT_FORMAT) {
      throw new Error("not a bridge encoder checkpoint");
    }
    if (obj.format_version !== CHECKPOINT_VERSION) {
      throw new Error(`unsupported checkpoint version ${obj.format_version}`);
    }
    const model = new PairEncoder(obj.config as ModelConfig);
    for (const [name, entry] of Object.entries<any>(obj.weights)) {
      const variable = model.weights.get(name);
      if (!variable) throw new Error(`checkpoint has unknown weight ${name}`);
      const tensor = tf.tensor(entry.data, entry.shape, "float32");
      if (tensor.shape.join(",") !== variable.shape.join(",")) {
        throw new Error(`shape mismatch for ${name}`);
      }
      variable.assign(tensor);
      tensor.dispose();
    }
    return model;
  }
}
