import socket
import subprocess
import sys
import time

import numpy as np
import pytest

from lima.remote import TransportError, connect_process, connect_tcp

from conftest import make_image

STUB = [sys.executable, "tests/oracle_stub.py"]


def stub_oracle(*extra, timeout=10.0):
    return connect_process(STUB + list(extra), timeout=timeout)


def test_handshake_and_embed_roundtrip():
    oracle = stub_oracle("--dims", "2x2x1")
    assert (oracle.embed_dim, oracle.num_classes, oracle.max_batch) == (4, 3, 16)
    img = make_image(2, 2, 1, seed=1)
    out = oracle.embed([img])
    # transport is float32, so values round-trip through float32 precision
    np.testing.assert_array_equal(out[0], img.data.ravel().astype("<f4").astype(np.float64))
    assert oracle.call_log.embed_calls == 1
    oracle.close()


def test_probs_roundtrip_and_chunking():
    oracle = stub_oracle("--dims", "2x2x1", "--max-batch", "2")
    images = [make_image(2, 2, 1, seed=s) for s in range(5)]
    rows = oracle.probs(images)
    np.testing.assert_allclose(rows, np.full((5, 3), 1 / 3), atol=1e-12)
    assert oracle.call_log.prob_calls == 5
    emb = oracle.embed(images)  # 3 chunks under the hood, order preserved
    for i, img in enumerate(images):
        np.testing.assert_array_equal(
            emb[i], img.data.ravel().astype("<f4").astype(np.float64))
    oracle.close()


def test_out_of_order_response_is_stashed():
    oracle = stub_oracle("--decoy-id")
    img = make_image(2, 2, 1, seed=2)
    out = oracle.embed([img])
    assert out.shape == (1, 4)
    oracle.close()


def test_error_response_carries_request_id():
    oracle = stub_oracle("--fail-op", "probs")
    with pytest.raises(TransportError, match="request .*induced failure"):
        oracle.probs([make_image(2, 2, 1)])
    # connection still usable for the other op
    assert oracle.embed([make_image(2, 2, 1)]).shape == (1, 4)
    oracle.close()


def test_timeout_raises_transport_error():
    oracle = stub_oracle("--hang-op", "embed", timeout=0.3)
    with pytest.raises(TransportError, match="timed out"):
        oracle.embed([make_image(2, 2, 1)])
    oracle.close()


def test_garbage_line_raises_transport_error():
    oracle = stub_oracle("--garbage")
    with pytest.raises(TransportError, match="unparseable"):
        oracle.embed([make_image(2, 2, 1)])
    oracle.close()


def test_tcp_transport():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    proc = subprocess.Popen(STUB + ["--tcp", str(port)], stdout=subprocess.PIPE,
                            text=True)
    try:
        assert proc.stdout.readline().strip() == "READY"
        oracle = connect_tcp(f"127.0.0.1:{port}")
        img = make_image(2, 2, 1, seed=4)
        out = oracle.embed([img])
        np.testing.assert_array_equal(
            out[0], img.data.ravel().astype("<f4").astype(np.float64))
        oracle.close()
    finally:
        proc.kill()
        proc.wait()
