"""Client for external oracle processes speaking newline-delimited JSON.

One JSON object per line. Requests carry a u64 id that the server must echo;
responses may arrive out of order. Image payloads travel as base64-encoded
little-endian float32, row-major; the engine upcasts to float64 on receipt.
"""
from __future__ import annotations

import base64
import json
import queue
import shlex
import socket
import subprocess
import threading
from typing import Sequence

import numpy as np

from .core import InvalidArgument, RasterImage
from .oracle import ModelOracle

DEFAULT_TIMEOUT = 30.0


class TransportError(RuntimeError):
    """Timeout or protocol violation while talking to an external oracle."""


def encode_image(image: RasterImage) -> dict:
    payload = base64.b64encode(
        np.ascontiguousarray(image.data, dtype="<f4").tobytes()).decode("ascii")
    return {"h": image.height, "w": image.width, "c": image.channels, "data": payload}


class _LineChannel:
    """A line-oriented duplex channel with timeouts."""

    def send_line(self, line: str) -> None:
        raise NotImplementedError

    def recv_line(self, timeout: float) -> str:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class ProcessChannel(_LineChannel):
    """Child process reached over its standard streams."""

    def __init__(self, argv: Sequence[str]):
        self.proc = subprocess.Popen(
            list(argv), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def send_line(self, line: str) -> None:
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise TransportError(f"oracle process closed its input: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise TransportError(f"oracle timed out after {timeout}s") from None
        if line is None:
            raise TransportError("oracle process closed its output")
        return line

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()


class TcpChannel(_LineChannel):
    def __init__(self, host: str, port: int):
        self.sock = socket.create_connection((host, port), timeout=DEFAULT_TIMEOUT)
        self._file = self.sock.makefile("r", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        try:
            self.sock.sendall((line + "\n").encode("utf-8"))
        except OSError as exc:
            raise TransportError(f"oracle socket write failed: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        self.sock.settimeout(timeout)
        try:
            line = self._file.readline()
        except (socket.timeout, OSError) as exc:
            raise TransportError(f"oracle timed out after {timeout}s") from exc
        if not line:
            raise TransportError("oracle closed the connection")
        return line

    def close(self) -> None:
        try:
            self._file.close()
            self.sock.close()
        except OSError:
            pass


class ExternalOracle(ModelOracle):
    """ModelOracle backed by a wire-protocol server; single-flight requests."""

    def __init__(self, channel: _LineChannel, timeout: float = DEFAULT_TIMEOUT):
        super().__init__()
        self._channel = channel
        self._timeout = timeout
        self._next_id = 0
        self._pending: dict[int, dict] = {}
        self._lock = threading.Lock()
        hello = self._exchange_hello()
        try:
            self.embed_dim = int(hello["embed_dim"])
            self.num_classes = int(hello["num_classes"])
            self.max_batch = int(hello["max_batch"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed hello response: {hello!r}") from exc
        if self.max_batch < 1:
            raise TransportError("oracle advertised max_batch < 1")

    def _exchange_hello(self) -> dict:
        self._channel.send_line(json.dumps({"op": "hello"}))
        line = self._channel.recv_line(self._timeout)
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise TransportError(f"bad hello line: {line!r}") from exc

    def _roundtrip(self, op: str, images: list[RasterImage]) -> np.ndarray:
        req_id = self._next_id
        self._next_id += 1
        request = {"id": req_id, "op": op, "images": [encode_image(i) for i in images]}
        self._channel.send_line(json.dumps(request))
        while True:
            if req_id in self._pending:
                response = self._pending.pop(req_id)
                break
            line = self._channel.recv_line(self._timeout)
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TransportError(
                    f"request {req_id}: unparseable response line {line!r}") from exc
            rid = obj.get("id")
            if rid == req_id:
                response = obj
                break
            if isinstance(rid, int):
                self._pending[rid] = obj  # out-of-order response for another request
            else:
                raise TransportError(f"request {req_id}: response without id: {obj!r}")
        if not response.get("ok", False):
            raise TransportError(
                f"request {req_id}: oracle error: {response.get('error', 'unknown')}")
        vectors = response.get("vectors")
        expect = self.embed_dim if op == "embed" else self.num_classes
        try:
            out = np.asarray(vectors, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise TransportError(f"request {req_id}: bad vectors payload") from exc
        if out.shape != (len(images), expect):
            raise TransportError(
                f"request {req_id}: expected {(len(images), expect)} vectors, "
                f"got {out.shape}")
        return out

    def _batched(self, op: str, images: list[RasterImage]) -> np.ndarray:
        with self._lock:
            chunks = [images[i:i + self.max_batch]
                      for i in range(0, len(images), self.max_batch)]
            return np.concatenate([self._roundtrip(op, c) for c in chunks])

    def _embed_batch(self, images):
        return self._batched("embed", images)

    def _probs_batch(self, images):
        return self._batched("probs", images)

    def close(self) -> None:
        self._channel.close()


def connect_process(argv: Sequence[str] | str, timeout: float = DEFAULT_TIMEOUT) -> ExternalOracle:
    if isinstance(argv, str):
        argv = shlex.split(argv)
    return ExternalOracle(ProcessChannel(argv), timeout=timeout)


def connect_tcp(address: str, timeout: float = DEFAULT_TIMEOUT) -> ExternalOracle:
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise InvalidArgument(f"expected host:port, got {address!r}")
    return ExternalOracle(TcpChannel(host, int(port)), timeout=timeout)
