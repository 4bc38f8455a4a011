import sys
from pathlib import Path

import numpy as np
import pytest

from treemirror.errors import (
    DeterminismError,
    HandshakeError,
    OracleSessionError,
    ProtocolError,
)
from treemirror.oracles import FunctionOracle, WireOracle, encode_predict, format_float

SHIM = str(Path(__file__).parent / "wire_shims.py")


def shim_cmd(mode: str) -> list[str]:
    return [sys.executable, SHIM, mode]


def open_shim(mode: str, **kwargs) -> WireOracle:
    return WireOracle.open(shim_cmd(mode), **kwargs)


def test_handshake_reads_hello_metadata():
    with open_shim("constant") as oracle:
        assert oracle.dimension == 4
        assert oracle.task == "classification"
        assert oracle.labels == (1, 2)
        assert oracle.concurrent is False


def test_constant_shim_answers_constant_labels():
    with open_shim("constant") as oracle:
        y = oracle.predict(np.zeros((5, 4)))
        assert y.tolist() == [1] * 5


def test_dimension_mismatch_at_handshake():
    with pytest.raises(HandshakeError, match="d=3"):
        open_shim("wrong-d", expected_dimension=4)


def test_child_exit_before_hello_reports_stderr():
    with pytest.raises(HandshakeError, match="boom"):
        open_shim("crash")


def test_malformed_hello_rejected():
    with pytest.raises(HandshakeError, match="malformed hello"):
        open_shim("garbage-hello")


def test_order_preservation_permutation_probe():
    with open_shim("rowvalue") as oracle:
        values = np.arange(50.0)[::-1]
        X = np.zeros((50, 4))
        X[:, 0] = values
        y = oracle.predict(X)
        assert y.tolist() == [int(v) for v in values]


def test_large_batch_matches_in_process_reimplementation():
    in_process = FunctionOracle(
        fn=lambda X: (X[:, 0] > 0).astype(np.int64), dimension=4, task="classification"
    )
    rng = np.random.default_rng(0)
    X = rng.normal(size=(10_000, 4))
    with open_shim("sign") as oracle:
        assert np.array_equal(oracle.predict(X), in_process.predict(X))


def test_label_outside_declared_set_is_protocol_error():
    with open_shim("badlabel") as oracle:
        with pytest.raises(ProtocolError, match="declared set"):
            oracle.predict(np.zeros((2, 4)))


def test_mismatched_result_id_is_protocol_error():
    with open_shim("badid") as oracle:
        with pytest.raises(ProtocolError, match="does not match"):
            oracle.predict(np.zeros((2, 4)))


def test_error_record_surfaces_child_message():
    with open_shim("errorrecord") as oracle:
        with pytest.raises(OracleSessionError, match="model exploded"):
            oracle.predict(np.zeros((2, 4)))


def test_batch_timeout():
    with open_shim("slow") as oracle:
        with pytest.raises(OracleSessionError, match="did not answer"):
            oracle.query_batch(np.zeros((1, 4)), timeout=0.5)


def test_determinism_probe_accepts_deterministic_sessions():
    with open_shim("sign") as oracle:
        oracle.verify_determinism(np.zeros((4, 4)))


def test_determinism_probe_rejects_noisy_sessions():
    with open_shim("noisy") as oracle:
        with pytest.raises(DeterminismError):
            oracle.verify_determinism(np.zeros((4, 4)))


def test_predict_record_encoding_is_bit_faithful():
    x = 0.1 + 0.2  # famous non-representable sum
    text = encode_predict(3, np.asarray([[x]]))
    assert text == '{"type":"predict","id":3,"X":[[0.30000000000000004]]}'
    assert float(format_float(x)) == x
