/**
 * chadpod-scorer/1 wire protocol, server side.
 *
 * Newline-delimited JSON over stdio. The client opens with
 * {"hello": "chadpod-scorer/1"}; the server confirms with
 * {"ok": true, "name": ...} (or refuses with {"ok": false, "error": ...})
 * and then answers each {"id", "prefix", "postfix"} request line with
 * {"id", "p"}. Malformed request lines get {"id": null, "error": ...}
 * and the loop keeps serving.
 */

import * as readline from "node:readline";
import type { Readable, Writable } from "node:stream";

export const PROTOCOL_NAME = "chadpod-scorer/1";

export interface ScoreRequest {
  id: string;
  prefix: string;
  postfix: string;
}

export function isValidHello(line: string): boolean {
  try {
    const obj = JSON.parse(line);
    return typeof obj === "object" && obj !== null && obj.hello === PROTOCOL_NAME;
  } catch {
    return false;
  }
}

export function parseRequest(line: string): ScoreRequest {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch (e) {
    throw new Error(`invalid JSON: ${(e as Error).message}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new Error("request must be a JSON object");
  }
  const rec = obj as Record<string, unknown>;
  const { id, prefix, postfix } = rec;
  if (typeof id !== "string" || id.length === 0) {
    throw new Error("request id must be a non-empty string");
  }
  if (typeof prefix !== "string" || prefix.length === 0) {
    throw new Error("prefix must be a non-empty string");
  }
  if (typeof postfix !== "string" || postfix.length === 0) {
    throw new Error("postfix must be a non-empty string");
  }
  return { id, prefix, postfix };
}

export function recoverId(line: string): string | null {
  try {
    const obj = JSON.parse(line);
    if (typeof obj === "object" && obj !== null && typeof obj.id === "string") {
      return obj.id;
    }
  } catch {
    // fall through
  }
  return null;
}

export type Handler = (req: ScoreRequest) => Promise<number>;

export interface ServeOptions {
  name: string;
  /** Refuse the handshake with this message (model failed to load). */
  refuse?: string;
}

/** Run the server loop until the input stream ends. */
export async function serve(
  handler: Handler,
  input: Readable,
  output: Writable,
  options: ServeOptions,
): Promise<void> {
  const rl = readline.createInterface({ input, crlfDelay: Infinity });
  const write = (obj: unknown) => output.write(JSON.stringify(obj) + "\n");

  let handshaken = false;
  for await (const raw of rl) {
    const line = raw.trim();
    if (line.length === 0) continue;

    if (!handshaken) {
      if (!isValidHello(line)) {
        write({ ok: false, error: "expected chadpod-scorer/1 hello" });
        return;
      }
      if (options.refuse !== undefined) {
        write({ ok: false, error: options.refuse });
        return;
      }
      write({ ok: true, name: options.name });
      handshaken = true;
      continue;
    }

    let req: ScoreRequest;
    try {
      req = parseRequest(line);
    } catch (e) {
      write({ id: recoverId(line), error: (e as Error).message });
      continue;
    }
    const p = await handler(req);
    write({ id: req.id, p });
  }
}
