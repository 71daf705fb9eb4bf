"""Structured API-documentation corpora.

A corpus is a JSONL file, one record per documented API entry point:

    {"source": "pytorch", "name": "torch.argsort",
     "description": "Returns the indices that sort a tensor ...",
     "params": [{"name": "input", "type": "Tensor"},
                {"name": "dim", "type": "int", "default": -1}]}

Loading normalizes names, maps raw documentation types into a small
abstract type space, and splits parameters into functional ones (they
carry data) and control ones (they steer execution modes and are
excluded from structural comparison and input generation).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

ABSTRACT_TYPES = ("Tensor", "Int", "Float", "Bool", "Shape", "String", "Complex", "Unknown")

FUNCTIONAL = "functional"
CONTROL = "control"

# Control vocabulary. A parameter is control-related when its lowercased
# name, or any trailing underscore-delimited suffix of it, equals one of
# these ("layer_name" -> "name", "random_seed" -> "seed").
DEFAULT_CONTROL_KEYWORDS = frozenset(
    {
        # naming / placement
        "name",
        "device",
        # compilation and execution mode
        "jit",
        "compile",
        "layout",
        "autocast",
        # dtype and shape pinning
        "dtype",
        "output_dtype",
        "input_shape",
        "output_shape",
        "validate_shape",
        # determinism
        "seed",
        "stable",
        "deterministic",
        # logging
        "verbose",
        "debug",
        "log_level",
        # ordering switches
        "direction",
        "ascending",
        "descending",
    }
)

# Raw documentation type -> abstract type. Keys are lowercased. Container
# types map to Shape because in these docs they overwhelmingly describe
# dimension lists rather than payload data.
_GENERIC_TYPE_MAP = {
    "tensor": "Tensor",
    "tensors": "Tensor",
    "variable": "Tensor",
    "array": "Tensor",
    "ndarray": "Tensor",
    "arraylike": "Tensor",
    "int": "Int",
    "integer": "Int",
    "long": "Int",
    "float": "Float",
    "double": "Float",
    "number": "Float",
    "scalar": "Float",
    "bool": "Bool",
    "boolean": "Bool",
    "str": "String",
    "string": "String",
    "complex": "Complex",
    "list": "Shape",
    "tuple": "Shape",
    "sequence": "Shape",
    "ints": "Shape",
    "shape": "Shape",
}

_TOKEN_CLEAN = re.compile(r"[^a-z0-9]+")


class CorpusFormatError(ValueError):
    """A corpus file or record violates the documented JSONL format."""


@dataclass(frozen=True)
class ParamSpec:
    """One documented parameter."""

    name: str
    raw_type: str
    abstract_type: str
    role: str  # FUNCTIONAL or CONTROL
    has_default: bool = False


@dataclass(frozen=True)
class ApiRecord:
    """One documented API entry point."""

    source_id: str
    qualified_name: str
    normalized_name: str
    description: str
    params: tuple[ParamSpec, ...]

    @property
    def functional_params(self) -> tuple[ParamSpec, ...]:
        return tuple(p for p in self.params if p.role == FUNCTIONAL)


@dataclass
class Corpus:
    """All records of one documentation source, in file order."""

    source_id: str
    records: list[ApiRecord] = field(default_factory=list)
    _by_name: dict[str, ApiRecord] = field(default_factory=dict, repr=False)

    def add(self, record: ApiRecord) -> None:
        if record.source_id != self.source_id:
            raise CorpusFormatError(
                f"record source {record.source_id!r} does not match corpus {self.source_id!r}"
            )
        if record.qualified_name in self._by_name:
            raise CorpusFormatError(
                f"duplicate qualified name {record.qualified_name!r} in source {self.source_id!r}"
            )
        self.records.append(record)
        self._by_name[record.qualified_name] = record

    def get(self, qualified_name: str) -> ApiRecord | None:
        return self._by_name.get(qualified_name)

    def __iter__(self) -> Iterator[ApiRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def normalize_api_name(qualified_name: str) -> str:
    """Lowercased last dot-segment: 'torch.linalg.Cholesky' -> 'cholesky'."""
    return qualified_name.rsplit(".", 1)[-1].lower()


def classify_param_name(name: str, keywords: frozenset[str] = DEFAULT_CONTROL_KEYWORDS) -> str:
    """CONTROL if the name or any trailing underscore suffix is a keyword."""
    low = name.lower()
    if low in keywords:
        return CONTROL
    parts = low.split("_")
    for i in range(1, len(parts)):
        if "_".join(parts[i:]) in keywords:
            return CONTROL
    return FUNCTIONAL


def classify_param(param: ParamSpec, keywords: frozenset[str] = DEFAULT_CONTROL_KEYWORDS) -> str:
    return classify_param_name(param.name, keywords)


def map_abstract_type(
    source_id: str,
    raw_type: str,
    overrides: dict[str, dict[str, str]] | None = None,
) -> str:
    """Map a raw documentation type to the abstract space.

    Per-source overrides win over the generic table; anything unmapped is
    Unknown. Matching is case-insensitive and ignores punctuation, so
    'Tensor', 'tf.Tensor' and 'array_like' resolve without special cases.
    """
    key = _TOKEN_CLEAN.sub("", raw_type.strip().lower().rsplit(".", 1)[-1])
    if overrides:
        per_source = overrides.get(source_id, {})
        if key in per_source:
            return per_source[key]
    return _GENERIC_TYPE_MAP.get(key, "Unknown")


def _build_record(
    raw: dict,
    index: int,
    path: str,
    keywords: frozenset[str],
    overrides: dict[str, dict[str, str]] | None,
) -> ApiRecord:
    for fld in ("source", "name", "description", "params"):
        if fld not in raw:
            raise CorpusFormatError(f"{path}:{index}: missing field {fld!r}")
    source = raw["source"]
    name = raw["name"]
    if not isinstance(source, str) or not source:
        raise CorpusFormatError(f"{path}:{index}: 'source' must be a non-empty string")
    if not isinstance(name, str) or not name:
        raise CorpusFormatError(f"{path}:{index}: 'name' must be a non-empty string")
    if not isinstance(raw["description"], str):
        raise CorpusFormatError(f"{path}:{index}: 'description' must be a string")
    if not isinstance(raw["params"], list):
        raise CorpusFormatError(f"{path}:{index}: 'params' must be a list")
    normalized = normalize_api_name(name)
    if not normalized:
        raise CorpusFormatError(f"{path}:{index}: name {name!r} normalizes to empty")
    params = []
    for j, p in enumerate(raw["params"]):
        if not isinstance(p, dict) or "name" not in p or "type" not in p:
            raise CorpusFormatError(f"{path}:{index}: params[{j}] needs 'name' and 'type'")
        pname = p["name"]
        ptype = p["type"]
        if not isinstance(pname, str) or not pname:
            raise CorpusFormatError(f"{path}:{index}: params[{j}].name must be non-empty")
        if not isinstance(ptype, str):
            raise CorpusFormatError(f"{path}:{index}: params[{j}].type must be a string")
        params.append(
            ParamSpec(
                name=pname,
                raw_type=ptype,
                abstract_type=map_abstract_type(source, ptype, overrides),
                role=classify_param_name(pname, keywords),
                has_default="default" in p,
            )
        )
    return ApiRecord(
        source_id=source,
        qualified_name=name,
        normalized_name=normalized,
        description=raw["description"],
        params=tuple(params),
    )


def load_corpus(
    path: str | Path,
    *,
    keywords: frozenset[str] = DEFAULT_CONTROL_KEYWORDS,
    type_overrides: dict[str, dict[str, str]] | None = None,
) -> Corpus:
    """Load one JSONL corpus file. All records must share one source id."""
    path = Path(path)
    corpus: Corpus | None = None
    with path.open("r", encoding="utf-8") as fh:
        for index, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{index}: invalid JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise CorpusFormatError(f"{path}:{index}: record must be an object")
            record = _build_record(raw, index, str(path), keywords, type_overrides)
            if corpus is None:
                corpus = Corpus(source_id=record.source_id)
            corpus.add(record)
    if corpus is None or not corpus.records:
        raise CorpusFormatError(f"{path}: corpus contains no records")
    return corpus
