import { ChildProcessWithoutNullStreams, spawn } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import * as readline from "node:readline";

export const ROOT = path.resolve(__dirname, "..");
export const CLI = path.join(ROOT, "dist", "cli.js");

export interface Example {
  id: string;
  game: string;
  prefix: string;
  postfix: string;
  label: "branch" | "no_branch";
  kind: string;
}

/** 40-example smoke dataset (28 train / 12 dev) with a separable marker. */
export function writeSmokeDataset(dir: string): void {
  fs.mkdirSync(dir, { recursive: true });
  const make = (n: number, tag: string): Example[] =>
    Array.from({ length: n }, (_, i) => {
      const positive = i % 2 === 0;
      const marker = positive ? "zephyr" : "granite";
      return {
        id: `${tag}-${i}`,
        game: "smoke",
        prefix: `The road ran past the ${marker} marker ${i}. It kept on going a while.`,
        postfix: `Past the marker the land opened out ${i}. Nothing else changed yet.`,
        label: positive ? "branch" : "no_branch",
        kind: positive ? "positive" : "easy_neg",
      };
    });
  const write = (name: string, rows: Example[]) =>
    fs.writeFileSync(
      path.join(dir, name),
      rows.map((r) => JSON.stringify(r)).join("\n") + "\n",
      "utf-8",
    );
  write("train.jsonl", make(28, "tr"));
  write("dev.jsonl", make(12, "dv"));
  write("test.jsonl", make(4, "te"));
}

export class ServerHandle {
  private readonly proc: ChildProcessWithoutNullStreams;
  private readonly lines: string[] = [];
  private waiters: Array<(line: string | null) => void> = [];
  private closed = false;

  constructor(args: string[]) {
    this.proc = spawn(process.execPath, [CLI, ...args], {
      stdio: ["pipe", "pipe", "pipe"],
    });
    const rl = readline.createInterface({ input: this.proc.stdout, crlfDelay: Infinity });
    rl.on("line", (line) => {
      const waiter = this.waiters.shift();
      if (waiter) waiter(line);
      else this.lines.push(line);
    });
    rl.on("close", () => {
      this.closed = true;
      for (const waiter of this.waiters.splice(0)) waiter(null);
    });
  }

  send(line: string): void {
    this.proc.stdin.write(line + "\n");
  }

  async readLine(timeoutMs = 30_000): Promise<string | null> {
    const buffered = this.lines.shift();
    if (buffered !== undefined) return buffered;
    if (this.closed) return null;
    return await new Promise<string | null>((resolve, reject) => {
      const timer = setTimeout(() => {
        this.waiters = this.waiters.filter((w) => w !== wrapped);
        reject(new Error(`no server line within ${timeoutMs}ms`));
      }, timeoutMs);
      const wrapped = (line: string | null) => {
        clearTimeout(timer);
        resolve(line);
      };
      this.waiters.push(wrapped);
    });
  }

  kill(): void {
    this.proc.kill();
  }
}
