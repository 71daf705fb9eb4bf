"""Three-stage matching of equivalent APIs across corpora.

Stage 1 keeps name-similar candidates (cheap lexical cut). Stage 2 ranks
the remainder by description similarity and keeps the top-1 when its lead
over the runner-up is decisive, else the top-3. Stage 3 accepts the best
candidate whose functional parameter structure agrees exactly with the
reference (count term + type term == 2).

A group holds the reference record plus at most one accepted record per
target source. Groups serialize to a JSONL file (one group per line) that
carries everything downstream stages need, so fuzzing never re-reads the
corpora.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Sequence

from .corpus import ApiRecord, Corpus, normalize_api_name
from .similarity import (
    EmbeddingProvider,
    EmbeddingVector,
    SimilarityScores,
    description_similarity,
    embed_record,
    name_similarity,
    param_components,
)

if TYPE_CHECKING:
    from .align import AlignedSignature

NAME_THRESHOLD = 0.5
DEFAULT_MARGIN = 0.3
STRUCT_TOLERANCE = 1e-9


class GroupFormatError(ValueError):
    """A group file line violates the documented format."""


@dataclass
class MatchCandidate:
    reference: ApiRecord
    candidate: ApiRecord
    scores: SimilarityScores
    stage_reached: int = 1
    accepted: bool = False


@dataclass
class MatchStats:
    references: int = 0
    stage1_candidates: int = 0
    stage2_survivors: int = 0
    accepted: int = 0
    groups: int = 0


@dataclass
class ApiGroup:
    """A matched set of equivalent APIs; members[0] is the reference."""

    group_id: str
    members: tuple[ApiRecord, ...]
    scores: dict[str, SimilarityScores] = field(default_factory=dict)
    aligned: "AlignedSignature | None" = None

    def __post_init__(self) -> None:
        sources = [m.source_id for m in self.members]
        if len(set(sources)) != len(sources):
            raise ValueError(f"group {self.group_id}: duplicate member source")

    @property
    def reference(self) -> ApiRecord:
        return self.members[0]

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(m.source_id for m in self.members)

    def member(self, source_id: str) -> ApiRecord | None:
        for m in self.members:
            if m.source_id == source_id:
                return m
        return None


def stage1_candidates(reference: ApiRecord, target: Corpus) -> list[MatchCandidate]:
    """All target records with normalized-name similarity >= 0.5."""
    out = []
    for rec in target:
        sim = name_similarity(reference.normalized_name, rec.normalized_name)
        if sim >= NAME_THRESHOLD:
            out.append(
                MatchCandidate(
                    reference=reference,
                    candidate=rec,
                    scores=SimilarityScores(name_sim=sim),
                )
            )
    return out


def stage2_semantic_filter(
    candidates: list[MatchCandidate],
    embed: Callable[[ApiRecord], EmbeddingVector],
    margin: float = DEFAULT_MARGIN,
) -> list[MatchCandidate]:
    """Rank by description similarity; decisive leader survives alone.

    The lead is relative: m = (s1 - s2) / s1. m >= margin keeps only the
    top candidate; otherwise the top three survive, plus any candidate
    tied exactly with the leader (a cut never splits a tie). A leader with
    score <= 0 means descriptions carry no signal: nothing survives.
    """
    if not candidates:
        return []
    ref_vec = embed(candidates[0].reference)
    for cand in candidates:
        cand.scores.desc_sim = description_similarity(ref_vec, embed(cand.candidate))
    ranked = sorted(
        candidates, key=lambda c: (-c.scores.desc_sim, c.candidate.qualified_name)
    )
    s1 = ranked[0].scores.desc_sim
    if s1 <= 0.0:
        return []
    if len(ranked) == 1:
        survivors = ranked
    else:
        s2 = ranked[1].scores.desc_sim
        if (s1 - s2) / s1 >= margin:
            survivors = ranked[:1]
        else:
            survivors = ranked[:3] + [c for c in ranked[3:] if c.scores.desc_sim == s1]
    for cand in survivors:
        cand.stage_reached = 2
    return survivors


def stage3_structural_verify(candidates: list[MatchCandidate]) -> MatchCandidate | None:
    """Accept the best candidate with exact structural agreement.

    Eligible means count term + type term == 2 (within 1e-9). Best means
    highest description similarity, then highest name similarity, then
    first in qualified-name order.
    """
    eligible = []
    for cand in candidates:
        count, types = param_components(cand.reference, cand.candidate)
        cand.scores.count_sim = count
        cand.scores.type_sim = types
        if abs(2.0 - (count + types)) <= STRUCT_TOLERANCE:
            cand.stage_reached = 3
            eligible.append(cand)
    if not eligible:
        return None
    best = min(
        eligible,
        key=lambda c: (-c.scores.desc_sim, -c.scores.name_sim, c.candidate.qualified_name),
    )
    best.accepted = True
    return best


def build_groups(
    reference: Corpus,
    targets: Sequence[Corpus],
    provider: EmbeddingProvider,
    *,
    margin: float = DEFAULT_MARGIN,
    stats: MatchStats | None = None,
) -> list[ApiGroup]:
    """Match every reference record against every target corpus.

    Deterministic: reference records are visited in file order, targets in
    the given order, and every tie inside a stage breaks lexicographically.
    """
    seen = {reference.source_id}
    for t in targets:
        if t.source_id in seen:
            raise ValueError(f"duplicate source in matching run: {t.source_id!r}")
        seen.add(t.source_id)

    cache: dict[tuple[str, str], EmbeddingVector] = {}

    def embed(rec: ApiRecord) -> EmbeddingVector:
        key = (rec.source_id, rec.qualified_name)
        if key not in cache:
            cache[key] = embed_record(rec, provider)
        return cache[key]

    groups: list[ApiGroup] = []
    for ref_record in reference:
        if stats:
            stats.references += 1
        members = [ref_record]
        scores: dict[str, SimilarityScores] = {}
        for target in targets:
            c1 = stage1_candidates(ref_record, target)
            c2 = stage2_semantic_filter(c1, embed, margin)
            best = stage3_structural_verify(c2)
            if stats:
                stats.stage1_candidates += len(c1)
                stats.stage2_survivors += len(c2)
                stats.accepted += 1 if best else 0
            if best:
                members.append(best.candidate)
                scores[target.source_id] = best.scores
        if len(members) >= 2:
            groups.append(
                ApiGroup(
                    group_id=f"{ref_record.source_id}/{ref_record.qualified_name}",
                    members=tuple(members),
                    scores=scores,
                )
            )
    if stats:
        stats.groups = len(groups)
    return groups


def _scores_to_wire(s: SimilarityScores) -> dict:
    return {
        "name_sim": s.name_sim,
        "desc_sim": s.desc_sim,
        "count_sim": s.count_sim,
        "type_sim": s.type_sim,
        "param_sim": s.param_sim,
    }


def group_to_wire(group: ApiGroup, pairwise: list[dict] | None = None) -> dict:
    raw: dict = {
        "group_id": group.group_id,
        "members": [
            {"source": m.source_id, "name": m.qualified_name} for m in group.members
        ],
        "scores": {src: _scores_to_wire(s) for src, s in sorted(group.scores.items())},
    }
    if pairwise is not None:
        raw["pairwise"] = pairwise
    if group.aligned is not None:
        raw["canonical_params"] = [
            {"name": p.canonical_name, "type": p.abstract_type}
            for p in group.aligned.canonical_params
        ]
        raw["member_order"] = {
            src: list(order) for src, order in sorted(group.aligned.per_member_order.items())
        }
    return raw


def group_from_wire(raw: dict) -> ApiGroup:
    from .align import AlignedSignature, CanonicalParam  # deferred: align imports this module

    try:
        members = tuple(
            ApiRecord(
                source_id=m["source"],
                qualified_name=m["name"],
                normalized_name=normalize_api_name(m["name"]),
                description="",
                params=(),
            )
            for m in raw["members"]
        )
        scores = {
            src: SimilarityScores(
                name_sim=s["name_sim"],
                desc_sim=s["desc_sim"],
                count_sim=s["count_sim"],
                type_sim=s["type_sim"],
            )
            for src, s in raw.get("scores", {}).items()
        }
        aligned = None
        if "canonical_params" in raw:
            aligned = AlignedSignature(
                canonical_params=tuple(
                    CanonicalParam(canonical_name=p["name"], abstract_type=p["type"])
                    for p in raw["canonical_params"]
                ),
                per_member_order={
                    src: tuple(order) for src, order in raw["member_order"].items()
                },
            )
        return ApiGroup(
            group_id=raw["group_id"], members=members, scores=scores, aligned=aligned
        )
    except (KeyError, TypeError) as exc:
        raise GroupFormatError(f"malformed group record: {exc}") from exc


def pairwise_scores(
    group: ApiGroup, embed: Callable[[ApiRecord], EmbeddingVector]
) -> list[dict]:
    """Full pairwise score matrix over group members, for the group file."""
    out = []
    for i, a in enumerate(group.members):
        for b in group.members[i + 1 :]:
            count, types = param_components(a, b)
            out.append(
                {
                    "a": a.source_id,
                    "b": b.source_id,
                    "name_sim": name_similarity(a.normalized_name, b.normalized_name),
                    "desc_sim": description_similarity(embed(a), embed(b)),
                    "count_sim": count,
                    "type_sim": types,
                    "param_sim": count + types,
                }
            )
    return out


def write_group_file(
    groups: Sequence[ApiGroup],
    path: str | Path,
    provider: EmbeddingProvider | None = None,
) -> None:
    """One JSON object per line; pairwise scores included when a provider
    is available (they need descriptions, which stubs loaded back from a
    group file no longer carry)."""
    cache: dict[tuple[str, str], EmbeddingVector] = {}

    def embed(rec: ApiRecord) -> EmbeddingVector:
        key = (rec.source_id, rec.qualified_name)
        if key not in cache:
            cache[key] = embed_record(rec, provider)  # type: ignore[arg-type]
        return cache[key]

    with Path(path).open("w", encoding="utf-8") as fh:
        for group in groups:
            pw = pairwise_scores(group, embed) if provider is not None else None
            fh.write(json.dumps(group_to_wire(group, pw), sort_keys=True) + "\n")


def read_group_file(path: str | Path) -> list[ApiGroup]:
    groups = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for index, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GroupFormatError(f"{path}:{index}: invalid JSON: {exc}") from exc
            groups.append(group_from_wire(raw))
    return groups
