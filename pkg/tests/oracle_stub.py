#!/usr/bin/env python3
"""Minimal wire-protocol oracle used as a test double for the client.

Identity model: embeddings are the float32 pixel payloads upcast to float64,
probabilities are uniform rows. Misbehavior flags exercise the client's error
paths.
"""
import argparse
import base64
import json
import socket
import sys
import time

import numpy as np


def decode_images(images, h, w, c):
    out = []
    for im in images:
        arr = np.frombuffer(base64.b64decode(im["data"]), dtype="<f4")
        if (im["h"], im["w"], im["c"]) != (h, w, c) or arr.size != h * w * c:
            raise ValueError("unexpected image dimensions")
        out.append(arr.astype(np.float64))
    return out


def serve(rf, wf, args):
    h, w, c = (int(x) for x in args.dims.split("x"))
    emitted_decoy = False
    for line in rf:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        if msg.get("op") == "hello":
            wf.write(json.dumps({"embed_dim": h * w * c, "num_classes": args.classes,
                                 "max_batch": args.max_batch}) + "\n")
            wf.flush()
            continue
        rid = msg["id"]
        op = msg["op"]
        if args.hang_op == op:
            time.sleep(60)
        if args.garbage and not emitted_decoy:
            emitted_decoy = True
            wf.write("this is not json\n")
            wf.flush()
            continue
        if args.decoy_id and not emitted_decoy:
            emitted_decoy = True
            wf.write(json.dumps({"id": rid + 1000, "ok": True,
                                 "vectors": [[0.0] * (h * w * c)]}) + "\n")
        if args.fail_op == op:
            wf.write(json.dumps({"id": rid, "ok": False, "error": "induced failure"}) + "\n")
            wf.flush()
            continue
        if len(msg["images"]) > args.max_batch:
            wf.write(json.dumps({"id": rid, "ok": False,
                                 "error": "batch exceeds max_batch"}) + "\n")
            wf.flush()
            continue
        pixels = decode_images(msg["images"], h, w, c)
        if op == "embed":
            vectors = [p.tolist() for p in pixels]
        else:
            vectors = [[1.0 / args.classes] * args.classes for _ in pixels]
        wf.write(json.dumps({"id": rid, "ok": True, "vectors": vectors}) + "\n")
        wf.flush()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dims", default="2x2x1")
    ap.add_argument("--classes", type=int, default=3)
    ap.add_argument("--max-batch", type=int, default=16)
    ap.add_argument("--fail-op", default=None)
    ap.add_argument("--hang-op", default=None)
    ap.add_argument("--garbage", action="store_true")
    ap.add_argument("--decoy-id", action="store_true")
    ap.add_argument("--tcp", type=int, default=None)
    args = ap.parse_args()
    if args.tcp is not None:
        srv = socket.create_server(("127.0.0.1", args.tcp))
        print("READY", flush=True)
        conn, _ = srv.accept()
        with conn, conn.makefile("r") as rf, conn.makefile("w") as wf:
            serve(rf, wf, args)
    else:
        serve(sys.stdin, sys.stdout, args)


if __name__ == "__main__":
    main()
