"""Request loop: hello, then one line-delimited JSON call at a time.

Every failure inside a call, from malformed input to a framework
exception, becomes a status "error" reply. The loop itself only ends
when stdin closes, so the supervising engine can always tell a refused
call apart from a dead worker.
"""

from __future__ import annotations

import json
import sys
from typing import IO

from .bindings import Adapter
from .wire import decode_value

PROTOCOL_VERSION = 1


def _write_line(stream: IO[str], payload: dict) -> None:
    stream.write(json.dumps(payload) + "\n")
    stream.flush()


def serve(adapter: Adapter, stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> int:
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout

    _write_line(
        stdout,
        {
            "type": "hello",
            "protocol": PROTOCOL_VERSION,
            "backend": adapter.name,
            "manifest": adapter.manifest,
            "info": {"framework": adapter.name, "version": adapter.version},
        },
    )

    for line in stdin:
        if not line.strip():
            continue
        request_id: object = -1
        try:
            raw = json.loads(line)
            if isinstance(raw, dict) and "id" in raw:
                request_id = raw["id"]
            if not isinstance(raw, dict) or raw.get("type") != "call":
                raise ValueError("expected a call message")
            values = [decode_value(a) for a in raw.get("args", [])]
            outputs = adapter.call(str(raw.get("api", "")), values)
            reply = {"type": "result", "id": request_id, "status": "ok", "outputs": outputs}
        except Exception as exc:
            reply = {
                "type": "result",
                "id": request_id,
                "status": "error",
                "error": f"{type(exc).__name__}: {exc}",
            }
        _write_line(stdout, reply)
    return 0
