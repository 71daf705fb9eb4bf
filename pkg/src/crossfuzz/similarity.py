"""Similarity rules for API records.

Three independent signals feed the matcher:

* name similarity: normalized Levenshtein over normalized API names,
* description similarity: cosine over embedding vectors,
* parameter similarity: a count term plus a type-agreement term over the
  functional parameter lists; the two terms are reported separately and
  their sum is the structural score (a perfect match scores 2.0).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import ApiRecord

_TOKENIZE = re.compile(r"[a-z0-9]+")


class ProviderError(RuntimeError):
    """Base class for embedding provider failures."""


class ProviderConfigError(ProviderError):
    """The provider cannot be constructed from its inputs."""


class ProviderLookupError(ProviderError):
    """The provider has no vector for the requested record."""


class ProviderMismatchError(ValueError):
    """Two vectors come from different providers or spaces."""


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray  # 1-D float64
    provider_id: str


@dataclass
class SimilarityScores:
    """Scores of one candidate against one reference record.

    Filled progressively as matching stages run; fields not yet computed
    stay at 0.0.
    """

    name_sim: float = 0.0
    desc_sim: float = 0.0
    count_sim: float = 0.0
    type_sim: float = 0.0

    @property
    def param_sim(self) -> float:
        return self.count_sim + self.type_sim


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit-cost insert/delete/substitute."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def name_similarity(a: str, b: str) -> float:
    """1 - d(a,b)/max(len). Two empty names are identical (1.0)."""
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def tokenize(text: str) -> list[str]:
    return _TOKENIZE.findall(text.lower())


class EmbeddingProvider(Protocol):
    provider_id: str

    def embed(self, text: str, *, source: str | None = None, name: str | None = None) -> EmbeddingVector: ...


class LexicalTfProvider:
    """Term-frequency embeddings over a fixed vocabulary.

    The vocabulary is frozen at construction from the corpus descriptions,
    so every vector lives in one space. Deterministic and dependency-free;
    a drop-in for richer sentence encoders behind the same interface.
    """

    def __init__(self, texts: Sequence[str]):
        vocab = sorted({tok for text in texts for tok in tokenize(text)})
        if not vocab:
            raise ProviderConfigError("no tokens in any training text")
        self._index = {tok: i for i, tok in enumerate(vocab)}
        digest = hashlib.sha256("\x00".join(vocab).encode("utf-8")).hexdigest()[:8]
        self.provider_id = f"lexical-tf:{len(vocab)}:{digest}"

    @classmethod
    def from_corpora(cls, corpora: Sequence) -> "LexicalTfProvider":
        texts = [rec.description for corpus in corpora for rec in corpus]
        return cls(texts)

    def embed(self, text: str, *, source: str | None = None, name: str | None = None) -> EmbeddingVector:
        vec = np.zeros(len(self._index), dtype=np.float64)
        for tok in tokenize(text):
            idx = self._index.get(tok)
            if idx is not None:
                vec[idx] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0.0:
            vec /= norm
        return EmbeddingVector(values=vec, provider_id=self.provider_id)


class PrecomputedProvider:
    """Vectors from a sidecar JSONL file: {"source", "name", "vector"}.

    Lets an external encoder (run offline) drive matching. Lookup is by
    (source, name); the text argument is ignored.
    """

    def __init__(self, path: str | Path):
        path = Path(path)
        self._vectors: dict[tuple[str, str], np.ndarray] = {}
        dim: int | None = None
        try:
            with path.open("r", encoding="utf-8") as fh:
                for index, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    raw = json.loads(line)
                    key = (raw["source"], raw["name"])
                    vec = np.asarray(raw["vector"], dtype=np.float64)
                    if vec.ndim != 1 or vec.size == 0:
                        raise ProviderConfigError(f"{path}:{index}: vector must be 1-D and non-empty")
                    if dim is None:
                        dim = vec.size
                    elif vec.size != dim:
                        raise ProviderConfigError(
                            f"{path}:{index}: vector length {vec.size} != {dim}"
                        )
                    self._vectors[key] = vec
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ProviderConfigError(f"cannot load embeddings from {path}: {exc}") from exc
        if not self._vectors:
            raise ProviderConfigError(f"{path}: no vectors")
        self.provider_id = f"precomputed:{dim}:{len(self._vectors)}"

    def embed(self, text: str, *, source: str | None = None, name: str | None = None) -> EmbeddingVector:
        if source is None or name is None:
            raise ProviderConfigError("precomputed lookup needs source and name")
        vec = self._vectors.get((source, name))
        if vec is None:
            raise ProviderLookupError(f"no vector for ({source!r}, {name!r})")
        return EmbeddingVector(values=vec, provider_id=self.provider_id)


def embed_record(record: ApiRecord, provider: EmbeddingProvider) -> EmbeddingVector:
    return provider.embed(
        record.description, source=record.source_id, name=record.qualified_name
    )


def description_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity; zero-norm vectors compare as 0.0 to anything."""
    if a.provider_id != b.provider_id or a.values.shape != b.values.shape:
        raise ProviderMismatchError(
            f"vectors from different spaces: {a.provider_id!r} vs {b.provider_id!r}"
        )
    na = np.linalg.norm(a.values)
    nb = np.linalg.norm(b.values)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a.values, b.values) / (na * nb))


def count_similarity(n1: int, n2: int) -> float:
    """1 - |n1-n2|/max(n1,n2); two empty lists count as identical."""
    if n1 < 0 or n2 < 0:
        raise ValueError("parameter counts must be non-negative")
    if n1 == 0 and n2 == 0:
        return 1.0
    return 1.0 - abs(n1 - n2) / max(n1, n2)


def type_similarity(types1: Sequence[str], types2: Sequence[str]) -> float:
    """Positional type agreement over max(len); Unknown never matches."""
    if not types1 and not types2:
        return 1.0
    matches = sum(
        1 for t1, t2 in zip(types1, types2) if t1 == t2 and t1 != "Unknown"
    )
    return matches / max(len(types1), len(types2))


def param_components(a: ApiRecord, b: ApiRecord) -> tuple[float, float]:
    """(count term, type term) over the functional parameter lists."""
    ta = [p.abstract_type for p in a.functional_params]
    tb = [p.abstract_type for p in b.functional_params]
    return count_similarity(len(ta), len(tb)), type_similarity(ta, tb)


def param_similarity(a: ApiRecord, b: ApiRecord) -> float:
    count, types = param_components(a, b)
    return count + types
