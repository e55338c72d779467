import { ChildProcess, spawn } from "node:child_process";
import { createInterface, Interface } from "node:readline";
import path from "node:path";
import { fileURLToPath } from "node:url";

export const ADAPTER_DIR = path.dirname(path.dirname(fileURLToPath(import.meta.url)));
export const MAIN_JS = path.join(ADAPTER_DIR, "dist", "main.js");

/** Line-oriented client around a spawned adapter process. */
export class AdapterClient {
  private proc: ChildProcess;
  private rl: Interface;
  private queue: string[] = [];
  private waiters: Array<(line: string) => void> = [];

  constructor(args: string[]) {
    this.proc = spawn("node", [MAIN_JS, ...args], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    this.rl = createInterface({ input: this.proc.stdout! });
    this.rl.on("line", (line) => {
      const waiter = this.waiters.shift();
      if (waiter) waiter(line);
      else this.queue.push(line);
    });
  }

  sendRaw(line: string): void {
    this.proc.stdin!.write(line + "\n");
  }

  send(obj: unknown): void {
    this.sendRaw(JSON.stringify(obj));
  }

  recvLine(timeoutMs = 5000): Promise<string> {
    const queued = this.queue.shift();
    if (queued !== undefined) return Promise.resolve(queued);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("timed out waiting for line")),
        timeoutMs);
      this.waiters.push((line) => {
        clearTimeout(timer);
        resolve(line);
      });
    });
  }

  async recv(timeoutMs = 5000): Promise<any> {
    return JSON.parse(await this.recvLine(timeoutMs));
  }

  close(): void {
    this.proc.stdin!.end();
    this.proc.kill();
  }
}

export function encodePixels(h: number, w: number, c: number, values: number[]) {
  const arr = new Float32Array(values);
  const data = Buffer.from(arr.buffer).toString("base64");
  return { h, w, c, data };
}

export function seededPixels(n: number, seed: number): number[] {
  // deterministic LCG so tests can recompute expectations
  let state = seed >>> 0;
  const out: number[] = [];
  for (let i = 0; i < n; i++) {
    state = (state * 1664525 + 1013904223) >>> 0;
    out.push(0.05 + 0.9 * (state / 2 ** 32));
  }
  return out;
}
