/** Newline-delimited JSON request loop.
 *
 * Exactly one JSON object per line. Request ids are echoed; responses on one
 * connection are emitted in arrival order (single-threaded loop). Malformed
 * input yields an error response with the offending id when one can be
 * parsed, otherwise a protocol-error line without an id; the loop never
 * crashes on bad input.
 */
import { createInterface } from "node:readline";
import type { Readable, Writable } from "node:stream";

import { OraclePlugin } from "./plugins.js";
import type { WireImage } from "./codec.js";

export interface ServerConfig {
  plugin: OraclePlugin;
  maxBatch: number;
}

interface Request {
  id?: unknown;
  op?: unknown;
  images?: unknown;
}

function helloResponse(cfg: ServerConfig): string {
  return JSON.stringify({
    embed_dim: cfg.plugin.embedDim,
    num_classes: cfg.plugin.numClasses,
    max_batch: cfg.maxBatch,
  });
}

function errorLine(id: unknown, message: string): string {
  if (typeof id === "number" && Number.isInteger(id)) {
    return JSON.stringify({ id, ok: false, error: message });
  }
  return JSON.stringify({ ok: false, error: message });
}

export function handleLine(line: string, cfg: ServerConfig): string | null {
  const trimmed = line.trim();
  if (trimmed === "") return null;

  let msg: Request;
  try {
    msg = JSON.parse(trimmed) as Request;
  } catch {
    // try to salvage an id so the client can correlate the failure
    const idMatch = /"id"\s*:\s*(\d+)/.exec(trimmed);
    const id = idMatch ? Number.parseInt(idMatch[1], 10) : undefined;
    return errorLine(id, "malformed JSON line");
  }

  if (msg.op === "hello") return helloResponse(cfg);

  const { id, op, images } = msg;
  if (typeof id !== "number" || !Number.isInteger(id) || id < 0) {
    return errorLine(undefined, "request id missing or invalid");
  }
  if (op !== "embed" && op !== "probs") {
    return errorLine(id, `unknown op ${String(op)}`);
  }
  if (!Array.isArray(images)) {
    return errorLine(id, "images must be an array");
  }
  if (images.length > cfg.maxBatch) {
    return errorLine(id, `batch of ${images.length} exceeds max_batch ${cfg.maxBatch}`);
  }
  try {
    const batch = images as WireImage[];
    const vectors = op === "embed" ? cfg.plugin.embed(batch) : cfg.plugin.probs(batch);
    return JSON.stringify({ id, ok: true, vectors });
  } catch (err) {
    return errorLine(id, err instanceof Error ? err.message : String(err));
  }
}

export function serveStreams(input: Readable, output: Writable, cfg: ServerConfig): Promise<void> {
  return new Promise((resolve) => {
    const rl = createInterface({ input, crlfDelay: Infinity });
    rl.on("line", (line) => {
      const response = handleLine(line, cfg);
      if (response !== null) output.write(response + "\n");
    });
    rl.on("close", resolve);
  });
}
