"""Typed values on the wire.

Arguments arrive as JSON records tagged with a kind: tensors carry a
dtype, a shape, and row-major flat data; the scalar kinds carry a bare
value. Complex tensors put each element on the wire as a [real, imag]
pair. Outputs travel back the same way, always as tensors, since every
framework result is normalized to an array first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TENSOR = "tensor"
VALUE_SCALAR = "value_scalar"
INDEX_SCALAR = "index_scalar"
SHAPE = "shape"
FLAG = "flag"

WIRE_DTYPES = {
    "f32": np.float32,
    "f64": np.float64,
    "c64": np.complex64,
    "i64": np.int64,
    "bool": np.bool_,
}

# Framework outputs are upcast into the wire vocabulary where the cast
# is exact; anything else is refused rather than silently rounded.
_EXACT_UPCASTS = {
    np.dtype(np.bool_): "bool",
    np.dtype(np.int8): "i64",
    np.dtype(np.int16): "i64",
    np.dtype(np.int32): "i64",
    np.dtype(np.int64): "i64",
    np.dtype(np.uint8): "i64",
    np.dtype(np.uint16): "i64",
    np.dtype(np.uint32): "i64",
    np.dtype(np.float16): "f32",
    np.dtype(np.float32): "f32",
    np.dtype(np.float64): "f64",
    np.dtype(np.complex64): "c64",
}


class WireError(ValueError):
    """Malformed or unsupported wire record."""


@dataclass(frozen=True)
class WireValue:
    """One decoded argument.

    Tensors expose a shaped numpy array in `array`; the scalar kinds
    expose their payload in `value`.
    """

    kind: str
    array: np.ndarray | None = None
    value: object = None

    @property
    def dtype(self) -> str | None:
        if self.array is None:
            return None
        return _EXACT_UPCASTS[self.array.dtype]


def decode_value(raw: object) -> WireValue:
    if not isinstance(raw, dict):
        raise WireError(f"value record must be an object, got {type(raw).__name__}")
    kind = raw.get("kind")
    try:
        if kind == TENSOR:
            dtype = raw["dtype"]
            if dtype not in WIRE_DTYPES:
                raise WireError(f"unsupported dtype {dtype!r}")
            shape = tuple(int(d) for d in raw["shape"])
            if dtype == "c64":
                flat = np.asarray(
                    [complex(re, im) for re, im in raw["data"]], dtype=np.complex64
                )
            else:
                flat = np.asarray(raw["data"], dtype=WIRE_DTYPES[dtype])
            if flat.size != int(np.prod(shape)):
                raise WireError(
                    f"tensor data has {flat.size} elements for shape {list(shape)}"
                )
            return WireValue(kind=TENSOR, array=flat.reshape(shape))
        if kind == SHAPE:
            return WireValue(kind=SHAPE, value=tuple(int(d) for d in raw["value"]))
        if kind == VALUE_SCALAR:
            return WireValue(kind=VALUE_SCALAR, value=float(raw["value"]))
        if kind == INDEX_SCALAR:
            return WireValue(kind=INDEX_SCALAR, value=int(raw["value"]))
        if kind == FLAG:
            if not isinstance(raw["value"], bool):
                raise WireError(f"flag value must be a bool, got {raw['value']!r}")
            return WireValue(kind=FLAG, value=raw["value"])
    except WireError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise WireError(f"malformed {kind!r} record: {exc}") from exc
    raise WireError(f"unknown value kind {kind!r}")


def encode_array(arr: np.ndarray) -> dict:
    """Array to tensor record; dtypes outside the wire set are refused."""
    arr = np.asarray(arr)
    wire_dtype = _EXACT_UPCASTS.get(arr.dtype)
    if wire_dtype is None:
        raise WireError(f"unsupported output dtype {arr.dtype}")
    arr = arr.astype(WIRE_DTYPES[wire_dtype], copy=False)
    flat = np.ravel(arr, order="C")
    if wire_dtype == "c64":
        data = [[float(z.real), float(z.imag)] for z in flat]
    elif wire_dtype == "i64":
        data = [int(x) for x in flat]
    elif wire_dtype == "bool":
        data = [bool(x) for x in flat]
    else:
        data = [float(x) for x in flat]
    return {"kind": TENSOR, "dtype": wire_dtype, "shape": list(arr.shape), "data": data}
