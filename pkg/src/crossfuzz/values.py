"""Backend-neutral argument values and seed-input generation.

Every argument crossing the execution boundary is a ValueIR of one of
five kinds: tensor (dtype, shape, row-major flat data), value_scalar
(bounded float), index_scalar (axis-style int), shape (dimension list),
flag (bool). The JSON wire form used by the group/seed/finding files and
the worker protocol lives here too, so there is exactly one encoding.

Non-finite floats are encoded with Python's default JSON literals (NaN,
Infinity, -Infinity); complex numbers as [re, im] pairs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .align import CanonicalParam

TENSOR = "tensor"
VALUE_SCALAR = "value_scalar"
INDEX_SCALAR = "index_scalar"
SHAPE = "shape"
FLAG = "flag"

DTYPES = {
    "f32": np.float32,
    "f64": np.float64,
    "c64": np.complex64,
    "i64": np.int64,
    "bool": np.bool_,
}

_F32 = np.float32
_F64 = np.float64

# Adversarial element values, per dtype. The float sets carry the IEEE
# troublemakers: quiet NaN, both infinities, the signed zero, the smallest
# subnormal (tie-breaking behavior differs across backends exactly there),
# and large-magnitude values near the f32 overflow edge.
EDGE_VALUES: dict[str, tuple] = {
    "f32": (
        float("nan"),
        float("inf"),
        float("-inf"),
        -0.0,
        float(np.finfo(_F32).smallest_subnormal),
        1e38,
        -1e38,
    ),
    "f64": (
        float("nan"),
        float("inf"),
        float("-inf"),
        -0.0,
        float(np.finfo(_F64).smallest_subnormal),
        1e38,
        -1e38,
    ),
    "c64": (
        complex(float("nan"), float("nan")),
        complex(float("inf"), 0.0),
        complex(0.0, float("-inf")),
        complex(-0.0, -0.0),
        complex(float(np.finfo(_F32).smallest_subnormal), 0.0),
        complex(1e38, -1e38),
        complex(0.0, float("nan")),
    ),
    "i64": (0, 1, -1, 2**31 - 1, -(2**31)),
    "bool": (True, False),
}


class ValueIRError(ValueError):
    """A value violates its kind's structural rules."""


class UnsupportedSignatureError(ValueError):
    """The canonical signature contains a type we cannot generate for."""


@dataclass(eq=False)
class ValueIR:
    kind: str
    dtype: str | None = None
    shape: tuple[int, ...] | None = None
    data: np.ndarray | None = None  # 1-D, row-major
    value: object = None

    @staticmethod
    def tensor(dtype: str, shape: Sequence[int], data: np.ndarray | Sequence) -> "ValueIR":
        arr = np.asarray(data, dtype=DTYPES[dtype]).reshape(-1)
        return ValueIR(kind=TENSOR, dtype=dtype, shape=tuple(int(d) for d in shape), data=arr)

    @staticmethod
    def value_scalar(value: float) -> "ValueIR":
        return ValueIR(kind=VALUE_SCALAR, value=float(value))

    @staticmethod
    def index_scalar(value: int) -> "ValueIR":
        return ValueIR(kind=INDEX_SCALAR, value=int(value))

    @staticmethod
    def dims(value: Sequence[int]) -> "ValueIR":
        return ValueIR(kind=SHAPE, value=tuple(int(d) for d in value))

    @staticmethod
    def flag(value: bool) -> "ValueIR":
        return ValueIR(kind=FLAG, value=bool(value))

    def validate(self) -> None:
        if self.kind == TENSOR:
            if self.dtype not in DTYPES:
                raise ValueIRError(f"unknown dtype {self.dtype!r}")
            if self.shape is None or any(not isinstance(d, int) or d < 0 for d in self.shape):
                raise ValueIRError(f"bad tensor shape {self.shape!r}")
            if self.data is None or self.data.ndim != 1:
                raise ValueIRError("tensor data must be a 1-D array")
            if self.data.dtype != DTYPES[self.dtype]:
                raise ValueIRError(
                    f"data dtype {self.data.dtype} does not match declared {self.dtype}"
                )
            if self.data.size != math.prod(self.shape):
                raise ValueIRError(
                    f"data length {self.data.size} != product of shape {self.shape}"
                )
        elif self.kind == VALUE_SCALAR:
            if not isinstance(self.value, float) or math.isnan(self.value):
                raise ValueIRError(f"value_scalar must be a float, got {self.value!r}")
            if not 0.0 <= self.value <= 1.0:
                raise ValueIRError(f"value_scalar {self.value} outside [0, 1]")
        elif self.kind == INDEX_SCALAR:
            if not isinstance(self.value, int) or self.value < 0:
                raise ValueIRError(f"index_scalar must be a non-negative int, got {self.value!r}")
        elif self.kind == SHAPE:
            if not isinstance(self.value, tuple) or any(
                not isinstance(d, int) or d < 0 for d in self.value
            ):
                raise ValueIRError(f"shape value must be non-negative ints, got {self.value!r}")
        elif self.kind == FLAG:
            if not isinstance(self.value, bool):
                raise ValueIRError(f"flag must be a bool, got {self.value!r}")
        else:
            raise ValueIRError(f"unknown kind {self.kind!r}")

    def to_numpy(self) -> np.ndarray:
        if self.kind != TENSOR:
            raise ValueIRError(f"to_numpy on kind {self.kind!r}")
        assert self.data is not None and self.shape is not None
        return self.data.reshape(self.shape)

    def copy(self) -> "ValueIR":
        return ValueIR(
            kind=self.kind,
            dtype=self.dtype,
            shape=self.shape,
            data=None if self.data is None else self.data.copy(),
            value=self.value,
        )


def exact_equal(a: ValueIR, b: ValueIR) -> bool:
    """Bit-exact equality (distinguishes -0.0 from 0.0, NaN == NaN)."""
    if a.kind != b.kind:
        return False
    if a.kind == TENSOR:
        return (
            a.dtype == b.dtype
            and a.shape == b.shape
            and a.data is not None
            and b.data is not None
            and a.data.tobytes() == b.data.tobytes()
        )
    if a.kind == VALUE_SCALAR:
        return np.float64(a.value).tobytes() == np.float64(b.value).tobytes()
    return a.value == b.value


def value_to_wire(v: ValueIR) -> dict:
    if v.kind == TENSOR:
        assert v.data is not None and v.shape is not None
        if v.dtype == "c64":
            data = [[float(z.real), float(z.imag)] for z in v.data]
        elif v.dtype == "i64":
            data = [int(x) for x in v.data]
        elif v.dtype == "bool":
            data = [bool(x) for x in v.data]
        else:
            data = [float(x) for x in v.data]
        return {"kind": TENSOR, "dtype": v.dtype, "shape": list(v.shape), "data": data}
    if v.kind == SHAPE:
        return {"kind": SHAPE, "value": list(v.value)}  # type: ignore[arg-type]
    return {"kind": v.kind, "value": v.value}


def value_from_wire(raw: dict) -> ValueIR:
    try:
        kind = raw["kind"]
        if kind == TENSOR:
            dtype = raw["dtype"]
            if dtype not in DTYPES:
                raise ValueIRError(f"unknown dtype {dtype!r}")
            if dtype == "c64":
                data = np.asarray(
                    [complex(re, im) for re, im in raw["data"]], dtype=np.complex64
                )
            else:
                data = np.asarray(raw["data"], dtype=DTYPES[dtype])
            v = ValueIR(kind=TENSOR, dtype=dtype, shape=tuple(raw["shape"]), data=data)
        elif kind == SHAPE:
            v = ValueIR.dims(raw["value"])
        elif kind == VALUE_SCALAR:
            v = ValueIR.value_scalar(raw["value"])
        elif kind == INDEX_SCALAR:
            v = ValueIR.index_scalar(raw["value"])
        elif kind == FLAG:
            if not isinstance(raw["value"], bool):
                raise ValueIRError(f"flag value must be a bool, got {raw['value']!r}")
            v = ValueIR.flag(raw["value"])
        else:
            raise ValueIRError(f"unknown kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValueIRError):
            raise
        raise ValueIRError(f"malformed value record: {exc}") from exc
    v.validate()
    return v


@dataclass(frozen=True)
class SeedTuple:
    """One generated input: the canonical argument tuple for a group."""

    group_id: str
    args: tuple[ValueIR, ...]
    rng_seed: int

    def to_wire(self) -> dict:
        return {
            "group_id": self.group_id,
            "rng_seed": self.rng_seed,
            "args": [value_to_wire(a) for a in self.args],
        }

    @staticmethod
    def from_wire(raw: dict) -> "SeedTuple":
        try:
            return SeedTuple(
                group_id=raw["group_id"],
                args=tuple(value_from_wire(a) for a in raw["args"]),
                rng_seed=int(raw.get("rng_seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise ValueIRError(f"malformed seed record: {exc}") from exc


@dataclass
class GeneratorConfig:
    rank_min: int = 1
    rank_max: int = 4
    dim_max: int = 6
    tensor_dtypes: tuple[str, ...] = ("f32", "f64")
    edge_probability: float = 0.05
    structural_probability: float = 0.02
    flag_enumeration_limit: int = 4
    # normalized API names whose tensors are generated complex
    complex_apis: frozenset[str] = frozenset()

    def validate(self) -> None:
        if not 1 <= self.rank_min <= self.rank_max:
            raise ValueError("need 1 <= rank_min <= rank_max")
        if self.dim_max < 1:
            raise ValueError("dim_max must be >= 1")
        for d in self.tensor_dtypes:
            if d not in ("f32", "f64", "c64"):
                raise ValueError(f"cannot generate tensors of dtype {d!r}")
        if not 0.0 <= self.edge_probability <= 1.0:
            raise ValueError("edge_probability must be in [0, 1]")
        if not 0.0 <= self.structural_probability <= 1.0:
            raise ValueError("structural_probability must be in [0, 1]")


def derive_seed(*parts) -> int:
    """Stable 64-bit stream seed from arbitrary labels."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _is_axis_like(canonical_name: str) -> bool:
    return "axis" in canonical_name or canonical_name in ("dim", "dimension")


def _random_edge(rng: np.random.Generator, dtype: str):
    edges = EDGE_VALUES[dtype]
    return edges[int(rng.integers(len(edges)))]


def inject_edge_cases(
    args: tuple[ValueIR, ...], rng: np.random.Generator, config: GeneratorConfig
) -> tuple[ValueIR, ...]:
    """Structural variants and per-element edge replacement on tensors.

    Each tensor independently: with structural_probability it becomes an
    empty variant (one dimension zeroed) or a repeated-element variant;
    then each element is replaced by a dtype-appropriate edge value with
    edge_probability. Probability 1 rewrites every element.
    """
    out = []
    for arg in args:
        if arg.kind != TENSOR:
            out.append(arg)
            continue
        arg = arg.copy()
        assert arg.data is not None and arg.shape is not None and arg.dtype is not None
        if config.structural_probability > 0 and rng.uniform() < config.structural_probability:
            if len(arg.shape) > 0 and rng.integers(2) == 0:
                zeroed = int(rng.integers(len(arg.shape)))
                shape = list(arg.shape)
                shape[zeroed] = 0
                arg = ValueIR.tensor(arg.dtype, shape, np.empty(0, dtype=DTYPES[arg.dtype]))
            elif arg.data.size > 0:
                arg.data[:] = arg.data[0]
        if config.edge_probability > 0 and arg.data.size > 0:
            mask = rng.uniform(size=arg.data.size) < config.edge_probability
            for idx in np.nonzero(mask)[0]:
                arg.data[idx] = _random_edge(rng, arg.dtype)
        out.append(arg)
    return tuple(out)


class SeedFactory:
    """Deterministic input generator for one group's canonical signature.

    Tensors share one sampled shape per input so elementwise arithmetic is
    well-formed; with two or more tensors at rank >= 2 the trailing two
    dims are equal, keeping matrix products valid. Axis-style ints bind to
    the nearest preceding tensor's rank. Flags enumerate combinatorially
    over consecutive seeds while few, and fall back to random draws when
    the flag count exceeds the enumeration limit.
    """

    def __init__(
        self,
        group_id: str,
        canonical_params: Sequence[CanonicalParam],
        config: GeneratorConfig,
        master_seed: int,
        *,
        api_name: str | None = None,
    ):
        config.validate()
        self.group_id = group_id
        self.params = tuple(canonical_params)
        self.config = config
        self.master_seed = master_seed
        self._counter = 0
        for p in self.params:
            if p.abstract_type in ("String", "Unknown"):
                raise UnsupportedSignatureError(
                    f"{group_id}: cannot generate values for {p.canonical_name!r} "
                    f"({p.abstract_type})"
                )
        self._tensor_positions = [
            i for i, p in enumerate(self.params) if p.abstract_type in ("Tensor", "Complex")
        ]
        self._flag_positions = [
            i for i, p in enumerate(self.params) if p.abstract_type == "Bool"
        ]
        # Int/Shape params bind to the nearest preceding tensor, else the
        # first tensor in the signature, else nothing.
        self._assoc: dict[int, int | None] = {}
        for i, p in enumerate(self.params):
            if p.abstract_type not in ("Int", "Shape"):
                continue
            before = [t for t in self._tensor_positions if t < i]
            if before:
                self._assoc[i] = before[-1]
            elif self._tensor_positions:
                self._assoc[i] = self._tensor_positions[0]
            else:
                self._assoc[i] = None
        name = api_name if api_name is not None else group_id.rsplit("/", 1)[-1]
        self._complex = name.rsplit(".", 1)[-1].lower() in config.complex_apis

    def fresh(self) -> SeedTuple:
        cfg = self.config
        rng_seed = derive_seed(self.master_seed, self.group_id, self._counter)
        rng = np.random.default_rng(rng_seed)

        shape: list[int] = []
        dtype = "f32"
        if self._tensor_positions:
            rank = int(rng.integers(cfg.rank_min, cfg.rank_max + 1))
            shape = [int(d) for d in rng.integers(1, cfg.dim_max + 1, size=rank)]
            if len(self._tensor_positions) >= 2 and rank >= 2:
                shape[-1] = shape[-2]
            if self._complex:
                dtype = "c64"
            else:
                dtype = cfg.tensor_dtypes[int(rng.integers(len(cfg.tensor_dtypes)))]

        n_flags = len(self._flag_positions)
        enumerate_flags = 0 < n_flags <= cfg.flag_enumeration_limit
        flag_bits = self._counter % (2**n_flags) if enumerate_flags else 0

        args: list[ValueIR] = []
        for i, p in enumerate(self.params):
            t = p.abstract_type
            if t in ("Tensor", "Complex"):
                size = math.prod(shape)
                if dtype == "c64":
                    data = (
                        rng.standard_normal(size) + 1j * rng.standard_normal(size)
                    ).astype(np.complex64)
                else:
                    data = rng.standard_normal(size).astype(DTYPES[dtype])
                args.append(ValueIR.tensor(dtype, shape, data))
            elif t == "Int":
                assoc = self._assoc[i]
                if _is_axis_like(p.canonical_name):
                    rank_assoc = len(args[assoc].shape) if assoc is not None else 1  # type: ignore[arg-type]
                    rank_assoc = max(rank_assoc, 1)
                    args.append(ValueIR.index_scalar(int(rng.integers(0, rank_assoc))))
                else:
                    args.append(ValueIR.value_scalar(float(round(rng.uniform()))))
            elif t == "Float":
                args.append(ValueIR.value_scalar(float(rng.uniform())))
            elif t == "Bool":
                if enumerate_flags:
                    ordinal = self._flag_positions.index(i)
                    args.append(ValueIR.flag(bool((flag_bits >> ordinal) & 1)))
                else:
                    args.append(ValueIR.flag(bool(rng.integers(2))))
            elif t == "Shape":
                assoc = self._assoc[i]
                length = (
                    len(args[assoc].shape)  # type: ignore[arg-type]
                    if assoc is not None
                    else int(rng.integers(cfg.rank_min, cfg.rank_max + 1))
                )
                args.append(
                    ValueIR.dims([int(d) for d in rng.integers(1, cfg.dim_max + 1, size=length)])
                )
            else:  # pragma: no cover - blocked in __init__
                raise UnsupportedSignatureError(f"cannot generate {t}")

        out = inject_edge_cases(tuple(args), rng, cfg)
        self._counter += 1
        return SeedTuple(group_id=self.group_id, args=out, rng_seed=rng_seed)


def validate_seed(seed: SeedTuple, canonical_params: Sequence[CanonicalParam]) -> None:
    """Structural and range checks of a seed against a signature."""
    params = tuple(canonical_params)
    if len(seed.args) != len(params):
        raise ValueIRError(f"{len(seed.args)} args for {len(params)} canonical params")
    compatible = {
        "Tensor": (TENSOR,),
        "Complex": (TENSOR,),
        "Int": (INDEX_SCALAR, VALUE_SCALAR),
        "Float": (VALUE_SCALAR,),
        "Bool": (FLAG,),
        "Shape": (SHAPE,),
    }
    last_tensor_rank: int | None = None
    first_tensor_rank: int | None = None
    for arg in seed.args:
        if arg.kind == TENSOR and first_tensor_rank is None:
            first_tensor_rank = len(arg.shape)  # type: ignore[arg-type]
    for i, (arg, p) in enumerate(zip(seed.args, params)):
        arg.validate()
        allowed = compatible.get(p.abstract_type)
        if allowed is None or arg.kind not in allowed:
            raise ValueIRError(
                f"arg {i}: kind {arg.kind!r} incompatible with {p.abstract_type}"
            )
        if arg.kind == TENSOR:
            last_tensor_rank = len(arg.shape)  # type: ignore[arg-type]
        if arg.kind == INDEX_SCALAR:
            rank = last_tensor_rank if last_tensor_rank is not None else first_tensor_rank
            if rank is not None and arg.value >= max(rank, 1):  # type: ignore[operator]
                raise ValueIRError(
                    f"arg {i}: index {arg.value} out of range for rank {rank}"
                )


def dump_seeds(seeds: Sequence[SeedTuple], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for seed in seeds:
            fh.write(json.dumps(seed.to_wire(), sort_keys=True) + "\n")


def load_seeds(path: str | Path) -> list[SeedTuple]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(SeedTuple.from_wire(json.loads(line)))
    return out
