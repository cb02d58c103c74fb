"""Bridge to external simulator processes over a line protocol.

Request: one UTF-8 JSON line ``{"theta":{...},"n":<int>,"seed":<uint64>}``
(key order fixed). Response: a ``BEGIN_CSV`` line, the dataset as CSV, then
``END_CSV``. A worker reports failure with a single ``ERROR <message>``
line. Persistent workers serve many requests per process, which amortizes
model-load cost for heavy simulators; oneshot workers exit after one.
"""

from __future__ import annotations

import atexit
import json
import queue
import subprocess
import threading

from ..dataset import ColumnSchema, Dataset, read_csv_text
from ..errors import ConfigurationError, WorkerProtocolError
from ..rng import RandomStream
from .base import ExternalConfig, Theta


def request_line(theta: Theta, n: int, seed: int) -> str:
    return json.dumps({"theta": theta, "n": n, "seed": seed},
                      separators=(",", ":")) + "\n"


class ExternalWorker:
    """One worker subprocess plus a reader thread feeding a line queue."""

    def __init__(self, config: ExternalConfig):
        self.config = config
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._lock = threading.Lock()

    def _ensure_started(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        try:
            self._proc = subprocess.Popen(
                self.config.command, cwd=self.config.workdir,
                stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as exc:
            raise WorkerProtocolError(f"cannot start worker "
                                      f"{self.config.command}: {exc}") from exc
        self._lines = queue.Queue()
        thread = threading.Thread(target=self._pump, args=(self._proc,),
                                  daemon=True)
        thread.start()

    def _pump(self, proc: subprocess.Popen) -> None:
        for line in proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)  # EOF sentinel

    def _next_line(self) -> str:
        try:
            line = self._lines.get(timeout=self.config.timeout)
        except queue.Empty:
            self.close()
            raise WorkerProtocolError(
                f"worker timed out after {self.config.timeout}s") from None
        if line is None:
            try:
                code = self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                code = None
            self.close()
            if code not in (0, None):
                raise WorkerProtocolError(f"worker exited with status {code}")
            raise WorkerProtocolError("worker closed its output mid-response")
        return line

    def request(self, theta: Theta, n: int, seed: int) -> Dataset:
        with self._lock:
            self._ensure_started()
            try:
                self._proc.stdin.write(request_line(theta, n, seed))
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                code = self._proc.poll()
                self.close()
                raise WorkerProtocolError(
                    f"worker pipe closed (exit status {code})") from exc
            dataset = self._read_response(n)
            if not self.config.persistent:
                self.close()
            return dataset

    def _read_response(self, n: int) -> Dataset:
        first = self._next_line()
        if first.startswith("ERROR"):
            raise WorkerProtocolError(f"worker error: {first[5:].strip()}")
        if first != "BEGIN_CSV":
            raise WorkerProtocolError(
                f"expected BEGIN_CSV, got {first!r}")
        rows = []
        while True:
            line = self._next_line()
            if line == "END_CSV":
                break
            rows.append(line)
        if not rows:
            raise WorkerProtocolError("worker sent an empty CSV block")
        header = [h.strip() for h in rows[0].split(",")]
        if len(header) < 3:
            raise WorkerProtocolError(
                f"worker CSV needs covariates, treatment and outcome columns, "
                f"got header {rows[0]!r}")
        schema = ColumnSchema(header[-2], header[-1], tuple(header[:-2]))
        try:
            dataset = read_csv_text("\n".join(rows), schema)
        except ConfigurationError as exc:
            raise WorkerProtocolError(f"malformed worker CSV: {exc}") from exc
        if dataset.n != n:
            raise WorkerProtocolError(
                f"row-count mismatch: requested {n}, worker sent {dataset.n}")
        return dataset

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.terminate()
            proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()


_WORKERS: dict[ExternalConfig, ExternalWorker] = {}
_WORKERS_LOCK = threading.Lock()


def shared_worker(config: ExternalConfig) -> ExternalWorker:
    with _WORKERS_LOCK:
        worker = _WORKERS.get(config)
        if worker is None:
            worker = _WORKERS[config] = ExternalWorker(config)
        return worker


@atexit.register
def _shutdown_workers() -> None:
    with _WORKERS_LOCK:
        for worker in _WORKERS.values():
            worker.close()
        _WORKERS.clear()


def external_simulate(config: ExternalConfig, theta: Theta,
                      stream: RandomStream, n: int) -> Dataset:
    """One dataset from the worker; the request seed is stream-derived."""
    seed = int(stream.generator().integers(0, 1 << 63))
    worker = shared_worker(config) if config.persistent else ExternalWorker(config)
    return worker.request(theta, n, seed)
