"""Execution backends and the worker wire protocol.

A backend executes one API call on one library and always returns an
ExecutionOutcome; no exception escapes. Two in-process reference variants
implement a small op set over numpy and differ only in documented
tie/denormal handling, which makes them a controlled testbed for the
whole pipeline:

* stable: exact IEEE comparisons, stable order, NaN-propagating angle;
* flushties: subnormals flush to zero before sort comparisons, and angle
  returns 0.0 when both complex parts are NaN.

Out-of-process backends speak line-delimited UTF-8 JSON over
stdin/stdout. The worker sends a hello first:

    {"type": "hello", "protocol": 1, "backend": "<id>",
     "manifest": ["<api>", ...], "info": {...}}

then answers each {"type": "call", "id": N, "api": ..., "args": [...]}
with {"type": "result", "id": N, "status": "ok"|"error", ...}. Argument
and output values use the ValueIR wire form. Non-finite floats travel as
the JSON literals NaN/Infinity/-Infinity. A malformed line, a wrong id,
or worker exit while a call is in flight counts as a crash of that call.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .values import DTYPES, TENSOR, VALUE_SCALAR, ValueIR, value_from_wire, value_to_wire

PROTOCOL_VERSION = 1

OK = "ok"
ERROR = "error"
CRASH = "crash"
TIMEOUT = "timeout"
STATUSES = (OK, ERROR, CRASH, TIMEOUT)

STABLE = "stable"
FLUSH_TIES = "flushties"
REFERENCE_VARIANTS = (STABLE, FLUSH_TIES)

DEFAULT_TIMEOUT = 10.0
MAX_OUTPUT_ELEMENTS = 1_000_000


class BackendUnavailable(RuntimeError):
    """The backend process could not be started or refused the handshake."""


@dataclass(frozen=True)
class ExecutionOutcome:
    backend_id: str
    status: str
    outputs: tuple[ValueIR, ...] | None = None
    error: str | None = None
    nan_present: bool = False
    duration_ms: float = 0.0

    def to_wire(self, with_duration: bool = False) -> dict:
        raw: dict = {"backend_id": self.backend_id, "status": self.status}
        if self.outputs is not None:
            raw["outputs"] = [value_to_wire(v) for v in self.outputs]
        if self.error is not None:
            raw["error"] = self.error
        raw["nan_present"] = self.nan_present
        if with_duration:
            raw["duration_ms"] = self.duration_ms
        return raw


def _scan_nan(outputs: Sequence[ValueIR]) -> bool:
    for v in outputs:
        if v.kind == TENSOR and v.dtype in ("f32", "f64", "c64"):
            assert v.data is not None
            if bool(np.isnan(v.data).any()):
                return True
        elif v.kind == VALUE_SCALAR and math.isnan(v.value):  # type: ignore[arg-type]
            return True
    return False


def _output_elements(outputs: Sequence[ValueIR]) -> int:
    total = 0
    for v in outputs:
        if v.kind == TENSOR:
            assert v.data is not None
            total += v.data.size
    return total


class BackendHandle:
    """Common surface of in-process and worker backends."""

    def __init__(self, backend_id: str, timeout: float = DEFAULT_TIMEOUT):
        self.backend_id = backend_id
        self.call_timeout = timeout
        self.manifest: frozenset[str] = frozenset()

    def resolve(self, qualified_name: str) -> str | None:
        """Map a corpus name to a manifest entry, or None.

        Exact match first, then by lowercased last dot-segment (a corpus
        says 'torch.argsort' while a manifest may say just 'argsort').
        """
        if qualified_name in self.manifest:
            return qualified_name
        wanted = qualified_name.rsplit(".", 1)[-1].lower()
        hits = sorted(
            name for name in self.manifest if name.rsplit(".", 1)[-1].lower() == wanted
        )
        return hits[0] if hits else None

    def call(self, api: str, args: tuple[ValueIR, ...], timeout: float | None = None) -> ExecutionOutcome:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def describe(self) -> dict:
        return {"backend_id": self.backend_id, "kind": type(self).__name__}


def call(handle: BackendHandle, api: str, args: tuple[ValueIR, ...], timeout: float | None = None) -> ExecutionOutcome:
    """Total function: every invocation yields exactly one outcome."""
    return handle.call(api, args, timeout)


# ---------------------------------------------------------------------------
# In-process reference backends


def _np_dtype_tag(arr: np.ndarray) -> str:
    if arr.dtype == np.float32:
        return "f32"
    if arr.dtype == np.float64:
        return "f64"
    if arr.dtype == np.complex64:
        return "c64"
    if arr.dtype == np.bool_:
        return "bool"
    if np.issubdtype(arr.dtype, np.integer):
        return "i64"
    raise ValueError(f"unsupported output dtype {arr.dtype}")


def from_numpy(arr: np.ndarray) -> ValueIR:
    arr = np.asarray(arr)
    tag = _np_dtype_tag(arr)
    return ValueIR.tensor(tag, arr.shape, arr.astype(DTYPES[tag]).reshape(-1))


def _to_native(v: ValueIR):
    if v.kind == TENSOR:
        return v.to_numpy()
    return v.value


def _flush_subnormals(arr: np.ndarray) -> np.ndarray:
    if arr.dtype.kind != "f":
        return arr
    tiny = np.finfo(arr.dtype).tiny
    out = arr.copy()
    out[(out != 0) & (np.abs(out) < tiny)] = 0.0
    return out


def _make_reference_ops(flush: bool) -> dict[str, Callable]:
    """The shared op table; `flush` selects the flushties variant."""

    def argsort(args):
        arr = np.asarray(_to_native(args[0]))
        axis = int(_to_native(args[1])) if len(args) > 1 else 0
        key = _flush_subnormals(arr) if flush else arr
        return [from_numpy(np.argsort(key, axis=axis, kind="stable").astype(np.int64))]

    def add(args):
        return [from_numpy(np.add(_to_native(args[0]), _to_native(args[1])))]

    def mul(args):
        return [from_numpy(np.multiply(_to_native(args[0]), _to_native(args[1])))]

    def matmul(args):
        return [from_numpy(np.matmul(_to_native(args[0]), _to_native(args[1])))]

    def relu(args):
        arr = _to_native(args[0])
        return [from_numpy(np.maximum(arr, np.zeros((), dtype=arr.dtype)))]

    def softmax(args):
        arr = _to_native(args[0])
        axis = int(_to_native(args[1])) if len(args) > 1 else 0
        shifted = arr - np.max(arr, axis=axis, keepdims=True)
        e = np.exp(shifted)
        return [from_numpy(e / np.sum(e, axis=axis, keepdims=True))]

    def mean(args):
        arr = _to_native(args[0])
        axis = int(_to_native(args[1])) if len(args) > 1 else 0
        return [from_numpy(np.mean(arr, axis=axis))]

    def sum_(args):
        arr = _to_native(args[0])
        axis = int(_to_native(args[1])) if len(args) > 1 else 0
        return [from_numpy(np.sum(arr, axis=axis))]

    def angle(args):
        arr = np.asarray(_to_native(args[0]))
        out = np.angle(arr)
        if flush and arr.dtype.kind == "c":
            both_nan = np.isnan(arr.real) & np.isnan(arr.imag)
            out = np.where(both_nan, 0.0, out)
        if arr.dtype in (np.float32, np.complex64):
            out = np.asarray(out, dtype=np.float32)
        return [from_numpy(out)]

    def clamp(args):
        arr = _to_native(args[0])
        lo = float(_to_native(args[1])) if len(args) > 1 else 0.0
        hi = float(_to_native(args[2])) if len(args) > 2 else 1.0
        return [from_numpy(np.clip(arr, lo, hi).astype(arr.dtype))]

    return {
        "argsort": argsort,
        "add": add,
        "mul": mul,
        "matmul": matmul,
        "relu": relu,
        "softmax": softmax,
        "mean": mean,
        "sum": sum_,
        "angle": angle,
        "clamp": clamp,
    }


class InProcessBackend(BackendHandle):
    """Backend over a dict of python ops; crashes cannot occur here.

    Ops take the raw ValueIR argument tuple and return a list of ValueIR
    outputs. Any exception becomes an Error outcome. The timeout is not
    enforced in-process; these ops are trusted not to hang.
    """

    def __init__(
        self,
        backend_id: str,
        ops: Mapping[str, Callable],
        timeout: float = DEFAULT_TIMEOUT,
        max_output_elements: int = MAX_OUTPUT_ELEMENTS,
        info: dict | None = None,
    ):
        super().__init__(backend_id, timeout)
        self._ops = dict(ops)
        self.manifest = frozenset(self._ops)
        self._max_out = max_output_elements
        self._info = info or {}

    def call(self, api: str, args: tuple[ValueIR, ...], timeout: float | None = None) -> ExecutionOutcome:
        start = time.perf_counter()

        def done(**kw) -> ExecutionOutcome:
            return ExecutionOutcome(
                backend_id=self.backend_id,
                duration_ms=(time.perf_counter() - start) * 1e3,
                **kw,
            )

        fn = self._ops.get(api)
        if fn is None:
            return done(status=ERROR, error=f"unknown api {api!r}")
        try:
            with warnings.catch_warnings(), np.errstate(all="ignore"):
                warnings.simplefilter("ignore")
                outputs = tuple(fn(args))
        except Exception as exc:
            return done(status=ERROR, error=f"{type(exc).__name__}: {exc}")
        if _output_elements(outputs) > self._max_out:
            return done(status=ERROR, error="output exceeds element budget")
        return done(status=OK, outputs=outputs, nan_present=_scan_nan(outputs))

    def describe(self) -> dict:
        return {
            "backend_id": self.backend_id,
            "kind": "in-process",
            "apis": sorted(self.manifest),
            **self._info,
        }


def reference_backend(
    variant: str, backend_id: str | None = None, timeout: float = DEFAULT_TIMEOUT
) -> InProcessBackend:
    if variant not in REFERENCE_VARIANTS:
        raise ValueError(f"unknown reference variant {variant!r}")
    return InProcessBackend(
        backend_id or variant,
        _make_reference_ops(flush=(variant == FLUSH_TIES)),
        timeout=timeout,
        info={"variant": variant},
    )


# ---------------------------------------------------------------------------
# Out-of-process workers


class WorkerBackend(BackendHandle):
    """Client for a stdio JSON worker subprocess.

    One request in flight at a time. A timed-out or protocol-violating
    worker is killed and lazily respawned on the next call, so one bad
    input cannot poison the rest of a campaign. Input generation state
    lives in the engine, not here, so respawns do not hurt determinism.
    """

    def __init__(
        self,
        backend_id: str,
        command: Sequence[str],
        timeout: float = DEFAULT_TIMEOUT,
        spawn_timeout: float = 60.0,
        max_output_elements: int = MAX_OUTPUT_ELEMENTS,
    ):
        super().__init__(backend_id, timeout)
        self.command = list(command)
        self._spawn_timeout = spawn_timeout
        self._max_out = max_output_elements
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._next_id = 0
        self._info: dict = {}
        self._spawn()  # raises BackendUnavailable on a bad first handshake

    def _spawn(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            self._proc = None
            raise BackendUnavailable(f"{self.backend_id}: cannot start worker: {exc}") from exc
        self._lines = queue.Queue()
        thread = threading.Thread(target=self._pump, args=(self._proc, self._lines), daemon=True)
        thread.start()
        hello = self._read_line(self._spawn_timeout)
        try:
            raw = json.loads(hello) if hello is not None else None
        except json.JSONDecodeError:
            raw = None
        if (
            not isinstance(raw, dict)
            or raw.get("type") != "hello"
            or raw.get("protocol") != PROTOCOL_VERSION
            or not isinstance(raw.get("manifest"), list)
        ):
            self._kill()
            raise BackendUnavailable(
                f"{self.backend_id}: bad or missing hello from {self.command!r}"
            )
        self.manifest = frozenset(str(n) for n in raw["manifest"])
        self._info = {"backend": raw.get("backend"), "info": raw.get("info", {})}

    @staticmethod
    def _pump(proc: subprocess.Popen, out: queue.Queue) -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            out.put(line)
        out.put(None)  # EOF

    def _read_line(self, timeout: float) -> str | None:
        try:
            return self._lines.get(timeout=timeout)
        except queue.Empty:
            return ""  # distinguishable from EOF (None)

    def _kill(self) -> None:
        if self._proc is not None:
            try:
                self._proc.kill()
                self._proc.wait(timeout=5)
            except OSError:
                pass
            self._proc = None

    @property
    def alive(self) -> bool:
        return self._proc is not None and self._proc.poll() is None

    def call(self, api: str, args: tuple[ValueIR, ...], timeout: float | None = None) -> ExecutionOutcome:
        start = time.perf_counter()
        limit = self.call_timeout if timeout is None else timeout

        def done(**kw) -> ExecutionOutcome:
            return ExecutionOutcome(
                backend_id=self.backend_id,
                duration_ms=(time.perf_counter() - start) * 1e3,
                **kw,
            )

        if not self.alive:
            self._kill()
            try:
                self._spawn()
            except BackendUnavailable as exc:
                return done(status=CRASH, error=str(exc))

        self._next_id += 1
        call_id = self._next_id
        request = json.dumps(
            {"type": "call", "id": call_id, "api": api, "args": [value_to_wire(a) for a in args]}
        )
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(request + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            self._kill()
            return done(status=CRASH, error=f"worker pipe closed: {exc}")

        line = self._read_line(limit)
        if line == "":
            self._kill()
            return done(status=TIMEOUT, error=f"no reply within {limit}s")
        if line is None:
            self._kill()
            return done(status=CRASH, error="worker exited mid-call")

        def violation(msg: str) -> ExecutionOutcome:
            self._kill()
            return done(status=CRASH, error=f"protocol violation: {msg}")

        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            return violation(f"unparseable line ({exc})")
        if not isinstance(raw, dict) or raw.get("type") != "result":
            return violation(f"unexpected message type {raw!r}")
        if raw.get("id") != call_id:
            return violation(f"reply id {raw.get('id')!r} for request {call_id}")
        status = raw.get("status")
        if status == ERROR:
            return done(status=ERROR, error=str(raw.get("error", "unspecified")))
        if status != OK:
            return violation(f"unknown status {status!r}")
        try:
            outputs = tuple(value_from_wire(v) for v in raw.get("outputs", []))
        except Exception as exc:
            return violation(f"bad outputs: {exc}")
        if _output_elements(outputs) > self._max_out:
            return done(status=ERROR, error="output exceeds element budget")
        return done(status=OK, outputs=outputs, nan_present=_scan_nan(outputs))

    def close(self) -> None:
        if self._proc is not None and self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                pass
        self._kill()

    def describe(self) -> dict:
        return {
            "backend_id": self.backend_id,
            "kind": "worker",
            "command": self.command,
            **self._info,
        }
