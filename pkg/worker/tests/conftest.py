"""Protocol test harness: a tiny client that drives a worker subprocess."""

from __future__ import annotations

import json
import struct
import subprocess
import sys

import numpy as np
import pytest

# Float32 vector whose sort order reveals how a library compares
# subnormals: element 1 is the smallest positive subnormal, elements
# 0/3/8 are signed zeros.
GOLDEN_INPUT = [
    -0.0,
    1.401298464324817e-45,
    1.100000023841858,
    -0.0,
    5.960464477539063e-08,
    -2.0000000135803223,
    1000000.0,
    722801.375,
    0.0,
    -1.100000023841858,
]
# Exact IEEE comparison keeps the subnormal strictly above the zeros.
EXACT_COMPARE_ORDER = [5, 9, 0, 3, 8, 1, 4, 2, 7, 6]
# Libraries that flush subnormals to zero tie it with the zero block.
FLUSHED_COMPARE_ORDER = [5, 9, 0, 1, 3, 8, 4, 2, 7, 6]

F64_SPECIALS = [0.5, float("nan"), float("inf"), float("-inf"), -0.0, 5e-324, 1 / 3]


def tensor(dtype: str, data: list, shape: list | None = None) -> dict:
    if shape is None:
        shape = [len(data)]
    return {"kind": "tensor", "dtype": dtype, "shape": shape, "data": data}


def index(value: int) -> dict:
    return {"kind": "index_scalar", "value": value}


def scalar(value: float) -> dict:
    return {"kind": "value_scalar", "value": value}


def f64_bits(values) -> list[bytes]:
    return [struct.pack("<d", float(v)) for v in values]


class WorkerClient:
    """One worker subprocess plus the handshake it sent."""

    def __init__(self, framework: str):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "framework_worker", framework],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self.hello = json.loads(self.proc.stdout.readline())
        self._next_id = 0

    def send_line(self, text: str) -> None:
        assert self.proc.stdin is not None
        self.proc.stdin.write(text + "\n")
        self.proc.stdin.flush()

    def read_reply(self) -> dict:
        assert self.proc.stdout is not None
        return json.loads(self.proc.stdout.readline())

    def call(self, api: str, args: list[dict]) -> dict:
        self._next_id += 1
        self.send_line(
            json.dumps({"type": "call", "id": self._next_id, "api": api, "args": args})
        )
        reply = self.read_reply()
        assert reply["id"] == self._next_id
        return reply

    @property
    def alive(self) -> bool:
        return self.proc.poll() is None

    def close(self) -> int:
        try:
            if self.proc.stdin is not None:
                self.proc.stdin.close()
        except OSError:
            pass
        try:
            return self.proc.wait(timeout=15)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            return self.proc.wait(timeout=15)


@pytest.fixture(scope="module")
def numpy_worker():
    client = WorkerClient("numpy")
    yield client
    client.close()


def output_array(reply: dict, position: int = 0) -> np.ndarray:
    assert reply["status"] == "ok", reply.get("error")
    out = reply["outputs"][position]
    assert out["kind"] == "tensor"
    if out["dtype"] == "c64":
        flat = np.asarray([complex(re, im) for re, im in out["data"]], dtype=np.complex64)
    else:
        dtypes = {"f32": np.float32, "f64": np.float64, "i64": np.int64, "bool": np.bool_}
        flat = np.asarray(out["data"], dtype=dtypes[out["dtype"]])
    return flat.reshape(out["shape"])
