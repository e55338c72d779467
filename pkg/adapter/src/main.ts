/** Adapter entry point.
 *
 * Usage:
 *   node dist/main.js --plugin identity --dims 8x8x1 [--classes 10]
 *                     [--max-batch 64] [--listen stdio|tcp:PORT]
 *
 * Serves the wire protocol until end-of-input (stdio) or until the single
 * TCP client disconnects.
 */
import { createServer } from "node:net";
import process from "node:process";

import { buildPlugin, parseDims } from "./plugins.js";
import { serveStreams, ServerConfig } from "./server.js";

interface Args {
  plugin: string;
  dims: string;
  classes: number;
  maxBatch: number;
  listen: string;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    plugin: "identity",
    dims: "8x8x1",
    classes: 10,
    maxBatch: 64,
    listen: "stdio",
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const value = argv[i + 1];
    switch (flag) {
      case "--plugin":
        args.plugin = value;
        i++;
        break;
      case "--dims":
        args.dims = value;
        i++;
        break;
      case "--classes":
        args.classes = Number.parseInt(value, 10);
        i++;
        break;
      case "--max-batch":
        args.maxBatch = Number.parseInt(value, 10);
        i++;
        break;
      case "--listen":
        args.listen = value;
        i++;
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!Number.isInteger(args.maxBatch) || args.maxBatch < 1) {
    throw new Error("--max-batch must be a positive integer");
  }
  return args;
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const cfg: ServerConfig = {
    plugin: buildPlugin(args.plugin, parseDims(args.dims), args.classes),
    maxBatch: args.maxBatch,
  };

  if (args.listen === "stdio") {
    await serveStreams(process.stdin, process.stdout, cfg);
    return;
  }
  const tcpMatch = /^tcp:(\d+)$/.exec(args.listen);
  if (!tcpMatch) throw new Error(`--listen must be stdio or tcp:PORT, got ${args.listen}`);
  const port = Number.parseInt(tcpMatch[1], 10);
  await new Promise<void>((resolve, reject) => {
    const server = createServer((socket) => {
      serveStreams(socket, socket, cfg).then(() => {
        socket.end();
        server.close();
        resolve();
      });
    });
    server.on("error", reject);
    server.listen(port, "127.0.0.1", () => {
      process.stdout.write(`READY ${(server.address() as { port: number }).port}\n`);
    });
  });
}

main().catch((err) => {
  process.stderr.write(`${err instanceof Error ? err.message : String(err)}\n`);
  process.exit(1);
});
