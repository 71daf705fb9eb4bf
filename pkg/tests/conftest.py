"""Shared fixtures: bundled data paths, synthetic groups, stub workers."""

from __future__ import annotations

import sys
import textwrap
from pathlib import Path

import numpy as np
import pytest

from crossfuzz import bundled_data_dir
from crossfuzz.align import AlignedSignature, CanonicalParam
from crossfuzz.corpus import ApiRecord
from crossfuzz.matcher import ApiGroup
from crossfuzz.values import ValueIR

# The float32 vector whose sort order separates exact comparison from
# flush-to-zero comparison: signed zeros at 0/3/8, a subnormal at 1.
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
GOLDEN_EXACT_ORDER = [5, 9, 0, 3, 8, 1, 4, 2, 7, 6]
GOLDEN_FLUSHED_ORDER = [5, 9, 0, 1, 3, 8, 4, 2, 7, 6]


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return bundled_data_dir()


@pytest.fixture
def golden_tensor() -> ValueIR:
    return ValueIR.tensor("f32", (10,), np.asarray(GOLDEN_INPUT, dtype=np.float32))


def make_group(
    group_id: str,
    sources: list[str],
    canonical: list[tuple[str, str]],
    api_suffix: str = "op",
) -> ApiGroup:
    """Synthetic aligned group with identity argument orders."""
    members = tuple(
        ApiRecord(
            source_id=s,
            qualified_name=f"{s}.{api_suffix}",
            normalized_name=api_suffix,
            description="",
            params=(),
        )
        for s in sources
    )
    params = tuple(CanonicalParam(canonical_name=n, abstract_type=t) for n, t in canonical)
    aligned = AlignedSignature(
        canonical_params=params,
        per_member_order={s: tuple(range(len(params))) for s in sources},
    )
    return ApiGroup(group_id=group_id, members=members, aligned=aligned)


STUB_WORKER_SOURCE = textwrap.dedent(
    """
    import json, sys, time

    MANIFEST = ["echo", "boom", "slow", "garbage", "wrong_id", "fail"]
    print(json.dumps({"type": "hello", "protocol": 1, "backend": "stub",
                      "manifest": MANIFEST, "info": {"v": 1}}), flush=True)
    for line in sys.stdin:
        req = json.loads(line)
        api = req["api"]
        if api == "echo":
            print(json.dumps({"type": "result", "id": req["id"], "status": "ok",
                              "outputs": req["args"]}), flush=True)
        elif api == "boom":
            sys.exit(7)
        elif api == "slow":
            time.sleep(30)
        elif api == "garbage":
            print("}{ not json", flush=True)
        elif api == "wrong_id":
            print(json.dumps({"type": "result", "id": -1, "status": "ok",
                              "outputs": []}), flush=True)
        else:
            print(json.dumps({"type": "result", "id": req["id"], "status": "error",
                              "error": "requested failure"}), flush=True)
    """
)


@pytest.fixture
def stub_worker_cmd(tmp_path: Path) -> list[str]:
    script = tmp_path / "stub_worker.py"
    script.write_text(STUB_WORKER_SOURCE, encoding="utf-8")
    return [sys.executable, str(script)]
