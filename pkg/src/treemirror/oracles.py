"""Uniform blackbox access: in-process oracles and the subprocess wire protocol.

An oracle is anything with ``dimension``, ``task`` and a batched
``predict``; decision trees and forests satisfy the contract directly.
External models are reached over newline-delimited JSON on a child
process's stdin/stdout:

    hello   (child -> host): {"type":"hello","d":int,"task":...,"labels":[...]|null,"concurrent":bool}
    predict (host -> child): {"type":"predict","id":int,"X":[[f64,...],...]}
    result  (child -> host): {"type":"result","id":int,"y":[label,...]}
    error   (child -> host): {"type":"error","id":int|null,"message":str}

One record per line, UTF-8, flushed per record. Queries are batched: one
predict record carries a whole node sample, because per-point round trips
would dominate extraction time.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .core import DecisionTree
from .errors import (
    DeterminismError,
    DimensionMismatch,
    DomainError,
    HandshakeError,
    OracleSessionError,
    ProtocolError,
)
from .extraction import Forest


@runtime_checkable
class Oracle(Protocol):
    """Query contract: a batch of points in, a batch of labels out."""

    @property
    def dimension(self) -> int: ...

    @property
    def task(self) -> str: ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class FunctionOracle:
    """Wrap a closure as an oracle (e.g. a policy or a dataset lookup)."""

    fn: Callable[[np.ndarray], np.ndarray]
    dimension: int
    task: str
    labels: tuple[int, ...] | None = None
    concurrent: bool = True

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise DimensionMismatch(
                f"batch has shape {X.shape}, oracle expects dimension {self.dimension}"
            )
        y = np.asarray(self.fn(X))
        if y.shape != (X.shape[0],):
            raise OracleSessionError("oracle closure returned a misshapen batch")
        return y


def load_model(path: str | Path):
    """Read a tree or forest JSON model file, sniffing by schema."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "trees" in doc:
        return Forest.from_json_dict(doc)
    if "nodes" in doc:
        return DecisionTree.from_json_dict(doc)
    raise DomainError(f"{path}: not a recognizable model file")


# ---------------------------------------------------------------------------
# wire protocol
# ---------------------------------------------------------------------------

HANDSHAKE_TIMEOUT = 30.0
BATCH_TIMEOUT = 60.0


def format_float(v: float) -> str:
    """17 significant digits: bit-faithful for doubles on both ends."""
    return format(float(v), ".17g")


def encode_predict(request_id: int, X: np.ndarray) -> str:
    rows = ",".join(
        "[" + ",".join(format_float(v) for v in row) + "]" for row in X
    )
    return f'{{"type":"predict","id":{request_id},"X":[{rows}]}}'


class _LineReader:
    """Background reader so blocking pipes can honor timeouts."""

    _EOF = object()

    def __init__(self, stream) -> None:
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,), daemon=True)
        self._thread.start()

    def _pump(self, stream) -> None:
        try:
            for line in stream:
                self._queue.put(line)
        finally:
            self._queue.put(self._EOF)

    def next_line(self, timeout: float) -> str | None:
        """A line, or None on EOF; raises queue.Empty on timeout."""
        item = self._queue.get(timeout=timeout)
        if item is self._EOF:
            return None
        return item


class WireOracle:
    """Session with an external model served over the line protocol."""

    def __init__(
        self,
        proc: subprocess.Popen,
        dimension: int,
        task: str,
        labels: tuple[int, ...] | None,
        concurrent: bool,
        reader: _LineReader,
        command: str,
    ) -> None:
        self._proc = proc
        self._reader = reader
        self._command = command
        self._next_id = 1
        self.dimension = dimension
        self.task = task
        self.labels = labels
        self.concurrent = concurrent

    # ------------------------------------------------------------------
    @classmethod
    def open(
        cls,
        command: str | Sequence[str],
        expected_dimension: int | None = None,
        timeout: float = HANDSHAKE_TIMEOUT,
    ) -> "WireOracle":
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        display = command if isinstance(command, str) else shlex.join(argv)
        try:
            proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise HandshakeError(f"cannot spawn oracle command {display!r}: {exc}") from exc
        reader = _LineReader(proc.stdout)
        try:
            line = reader.next_line(timeout)
        except queue.Empty:
            proc.kill()
            raise HandshakeError(f"oracle {display!r} sent no hello within {timeout}s")
        if line is None:
            stderr = cls._drain_stderr(proc)
            raise HandshakeError(
                f"oracle {display!r} exited before hello; stderr:\n{stderr}"
            )
        try:
            hello = json.loads(line)
        except json.JSONDecodeError as exc:
            proc.kill()
            raise HandshakeError(f"malformed hello line {line!r}") from exc
        if hello.get("type") != "hello":
            proc.kill()
            raise HandshakeError(f"first record must be hello, got {hello!r}")
        try:
            d = int(hello["d"])
            task = str(hello["task"])
            raw_labels = hello.get("labels")
            concurrent = bool(hello.get("concurrent", False))
        except (KeyError, TypeError, ValueError) as exc:
            proc.kill()
            raise HandshakeError(f"incomplete hello record {hello!r}") from exc
        if task not in ("classification", "regression"):
            proc.kill()
            raise HandshakeError(f"hello declares unknown task {task!r}")
        if expected_dimension is not None and d != expected_dimension:
            proc.kill()
            raise HandshakeError(
                f"oracle declares d={d} but caller expects d={expected_dimension}"
            )
        labels = tuple(int(v) for v in raw_labels) if raw_labels else None
        return cls(proc, d, task, labels, concurrent, reader, display)

    @staticmethod
    def _drain_stderr(proc: subprocess.Popen) -> str:
        try:
            return proc.stderr.read() or "<empty>"
        except Exception:
            return "<unavailable>"

    # ------------------------------------------------------------------
    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.query_batch(X)

    def query_batch(self, X: np.ndarray, timeout: float = BATCH_TIMEOUT) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise DimensionMismatch(
                f"batch has shape {X.shape}, oracle declared d={self.dimension}"
            )
        if not np.all(np.isfinite(X)):
            raise DomainError("wire batches must be finite")
        request_id = self._next_id
        self._next_id += 1
        record = encode_predict(request_id, X)
        try:
            self._proc.stdin.write(record + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise OracleSessionError(
                f"oracle {self._command!r} is gone; stderr:\n{self._drain_stderr(self._proc)}"
            ) from exc
        try:
            line = self._reader.next_line(timeout)
        except queue.Empty:
            raise OracleSessionError(
                f"oracle {self._command!r} did not answer request {request_id} within {timeout}s"
            )
        if line is None:
            raise OracleSessionError(
                f"oracle {self._command!r} crashed mid-session; stderr:\n"
                f"{self._drain_stderr(self._proc)}"
            )
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable record {line!r}") from exc
        if reply.get("type") == "error":
            raise OracleSessionError(
                f"oracle reported an error for request {reply.get('id')}: "
                f"{reply.get('message')}"
            )
        if reply.get("type") != "result":
            raise ProtocolError(f"expected a result record, got {reply!r}")
        if reply.get("id") != request_id:
            raise ProtocolError(
                f"result id {reply.get('id')} does not match request id {request_id}"
            )
        y = reply.get("y")
        if not isinstance(y, list) or len(y) != X.shape[0]:
            raise ProtocolError(
                f"result carries {len(y) if isinstance(y, list) else '??'} labels "
                f"for a batch of {X.shape[0]}"
            )
        if self.task == "classification":
            labels = np.asarray([int(v) for v in y], dtype=np.int64)
            if self.labels is not None:
                declared = set(self.labels)
                bad = sorted(set(labels.tolist()) - declared)
                if bad:
                    raise ProtocolError(
                        f"labels {bad} are outside the declared set {sorted(declared)}"
                    )
            return labels
        return np.asarray([float(v) for v in y], dtype=np.float64)

    def verify_determinism(self, X_probe: np.ndarray) -> None:
        """Send the probe twice; reject the session if answers disagree."""
        first = self.query_batch(X_probe)
        second = self.query_batch(X_probe)
        if not np.array_equal(first, second):
            raise DeterminismError(
                f"oracle {self._command!r} answered a duplicate-row probe differently"
            )

    # ------------------------------------------------------------------
    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "WireOracle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def handshake(command: str | Sequence[str], expected_dimension: int | None = None) -> WireOracle:
    """Spawn and greet an external oracle; see :meth:`WireOracle.open`."""
    return WireOracle.open(command, expected_dimension=expected_dimension)
