/**
 * Protocol server backed by a trained pair-encoder checkpoint. Requests
 * longer than the model's sequence budget are middle-truncated per
 * segment, so the text adjacent to the boundary always survives.
 */

import * as fs from "node:fs";

import { PairEncoder } from "./model.js";
import { serve } from "./protocol.js";

export interface ServeConfig {
  modelPath: string;
  name?: string;
}

export function loadModel(modelPath: string): PairEncoder {
  const raw = fs.readFileSync(modelPath, "utf-8");
  return PairEncoder.fromCheckpoint(JSON.parse(raw));
}

export async function serveModel(cfg: ServeConfig): Promise<void> {
  let model: PairEncoder | null = null;
  let loadError = "";
  try {
    model = loadModel(cfg.modelPath);
  } catch (e) {
    loadError = `model load failed: ${(e as Error).message}`;
  }

  const name = cfg.name ?? "chadpod-bridge/1";
  if (model === null) {
    await serve(async () => 0, process.stdin, process.stdout, { name, refuse: loadError });
    return;
  }
  const encoder = model;
  await serve(
    async (req) => {
      const [p] = await encoder.scorePairs([{ prefix: req.prefix, postfix: req.postfix }]);
      return p;
    },
    process.stdin,
    process.stdout,
    { name },
  );
}
