"""API bindings: qualified names mapped to native callables.

An adapter owns the two conversion directions (wire array to native
tensor and back) plus a table of bindings. Bindings are resolved when
the adapter is built, so a name that does not resolve in the installed
framework version is dropped from the manifest up front instead of
failing later inside a call.
"""

from __future__ import annotations

import importlib
import sys
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .wire import FLAG, INDEX_SCALAR, SHAPE, TENSOR, VALUE_SCALAR, WireValue, encode_array


class UnknownApiError(KeyError):
    """Call names an API outside the manifest."""


def resolve_attr(path: str):
    """Dotted-path lookup: importable root module, then attributes."""
    parts = path.split(".")
    obj = importlib.import_module(parts[0])
    for part in parts[1:]:
        obj = getattr(obj, part)
    return obj


@dataclass(frozen=True)
class ApiBinding:
    """One served API: the advertised name and the resolved callable.

    The callable receives native positional arguments in wire order and
    may return a single tensor or a sequence of them.
    """

    qualified_name: str
    fn: Callable


class Adapter:
    def __init__(
        self,
        name: str,
        version: str,
        to_native: Callable[[np.ndarray], object],
        to_numpy: Callable[[object], np.ndarray],
        bindings: Mapping[str, ApiBinding],
    ):
        self.name = name
        self.version = version
        self._to_native = to_native
        self._to_numpy = to_numpy
        self.bindings = dict(bindings)

    @property
    def manifest(self) -> list[str]:
        return sorted(self.bindings)

    def native_args(self, values: Sequence[WireValue]) -> list[object]:
        out: list[object] = []
        for v in values:
            if v.kind == TENSOR:
                assert v.array is not None
                out.append(self._to_native(v.array))
            elif v.kind == INDEX_SCALAR:
                out.append(int(v.value))  # type: ignore[arg-type]
            elif v.kind == VALUE_SCALAR:
                out.append(float(v.value))  # type: ignore[arg-type]
            elif v.kind == SHAPE:
                out.append(tuple(v.value))  # type: ignore[arg-type]
            elif v.kind == FLAG:
                out.append(bool(v.value))
            else:  # pragma: no cover - decode_value rejects these first
                raise ValueError(f"unsupported argument kind {v.kind!r}")
        return out

    def call(self, api: str, values: Sequence[WireValue]) -> list[dict]:
        binding = self.bindings.get(api)
        if binding is None:
            raise UnknownApiError(f"unknown api {api!r}")
        result = binding.fn(*self.native_args(values))
        outputs = result if isinstance(result, (tuple, list)) else [result]
        return [encode_array(self._to_numpy(o)) for o in outputs]


def build_bindings(
    table: Sequence[tuple[str, str, Callable[[Callable], Callable] | None]],
) -> dict[str, ApiBinding]:
    """Resolve a (name, dotted_path, wrap) table into bindings.

    Entries whose path does not resolve are skipped with a warning on
    stderr so the manifest only advertises callable APIs.
    """
    bindings: dict[str, ApiBinding] = {}
    for name, path, wrap in table:
        try:
            fn = resolve_attr(path)
        except (ImportError, AttributeError) as exc:
            print(f"framework-worker: skipping {name}: {exc}", file=sys.stderr)
            continue
        bindings[name] = ApiBinding(name, wrap(fn) if wrap is not None else fn)
    return bindings
