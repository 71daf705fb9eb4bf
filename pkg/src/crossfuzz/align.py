"""Parameter alignment across a matched group.

Different libraries name the same functional parameter differently (dim
vs axis, input vs x vs a). Alignment normalizes names through an alias
map, takes the reference member's functional parameters as the canonical
order, and maps every member's parameters onto it: first by normalized
name, then by abstract type at minimal positional distance.

The result is one permutation per member: position i of the canonical
argument tuple lands at member position order[i].
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import ApiRecord, ParamSpec
from .matcher import ApiGroup

# alias -> canonical name; keys and values lowercase.
DEFAULT_ALIASES: dict[str, str] = {
    "dim": "axis",
    "axes": "axis",
    "dims": "axis",
    "x": "input",
    "values": "input",
    "a": "input",
    "tensor": "input",
    "other": "other",
    "b": "other",
    "y": "other",
}

# tensor1/input2 style families collapse to input_1/input_2.
_INDEXED = re.compile(r"^(?:tensor|input|x)(\d+)$")


class AlignmentError(ValueError):
    """A member parameter cannot be mapped onto the canonical signature."""


@dataclass(frozen=True)
class CanonicalParam:
    canonical_name: str
    abstract_type: str


@dataclass(frozen=True)
class AlignedSignature:
    """Canonical functional signature plus per-member argument orders.

    per_member_order[src][i] is the position in member src's own
    functional argument list where canonical argument i belongs.
    """

    canonical_params: tuple[CanonicalParam, ...]
    per_member_order: dict[str, tuple[int, ...]]

    def arity(self) -> int:
        return len(self.canonical_params)


def load_alias_map(path: str | Path) -> dict[str, str]:
    """Lines of "alias -> canonical"; '#' starts a comment."""
    aliases: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for index, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "->" not in line:
                raise ValueError(f"{path}:{index}: expected 'alias -> canonical'")
            alias, canonical = (part.strip().lower() for part in line.split("->", 1))
            if not alias or not canonical:
                raise ValueError(f"{path}:{index}: empty alias or canonical name")
            aliases[alias] = canonical
    return aliases


def normalize_param_name(raw: str, aliases: dict[str, str] | None = None) -> str:
    """Lowercase, collapse indexed families, then apply the alias map."""
    if aliases is None:
        aliases = DEFAULT_ALIASES
    low = raw.strip().lower()
    m = _INDEXED.match(low)
    if m:
        return f"input_{m.group(1)}"
    return aliases.get(low, low)


def _match_member(
    canonical: tuple[CanonicalParam, ...],
    member: ApiRecord,
    params: tuple[ParamSpec, ...],
    aliases: dict[str, str],
) -> tuple[int, ...]:
    names = [normalize_param_name(p.name, aliases) for p in params]
    assigned: dict[int, int] = {}  # canonical index -> member index
    taken: set[int] = set()

    # Pass 1: normalized-name matches with agreeing types.
    for i, cp in enumerate(canonical):
        best: int | None = None
        for j, (name, p) in enumerate(zip(names, params)):
            if j in taken or name != cp.canonical_name or p.abstract_type != cp.abstract_type:
                continue
            if best is None or abs(i - j) < abs(i - best) or (
                abs(i - j) == abs(i - best) and j < best
            ):
                best = j
        if best is not None:
            assigned[i] = best
            taken.add(best)

    # Pass 2: remaining slots by type at minimal positional distance.
    for i, cp in enumerate(canonical):
        if i in assigned:
            continue
        best = None
        for j, p in enumerate(params):
            if j in taken or p.abstract_type != cp.abstract_type:
                continue
            if best is None or abs(i - j) < abs(i - best) or (
                abs(i - j) == abs(i - best) and j < best
            ):
                best = j
        if best is None:
            raise AlignmentError(
                f"{member.source_id}:{member.qualified_name}: no functional parameter "
                f"matches canonical {cp.canonical_name!r} ({cp.abstract_type})"
            )
        assigned[i] = best
        taken.add(best)

    return tuple(assigned[i] for i in range(len(canonical)))


def align_signature(
    group: ApiGroup, aliases: dict[str, str] | None = None
) -> AlignedSignature:
    """Align all group members against the reference member.

    Requires every member to have the same number of functional
    parameters as the reference (guaranteed for matcher-accepted groups,
    where the structural score is exactly 2).
    """
    if aliases is None:
        aliases = DEFAULT_ALIASES
    ref = group.reference
    ref_params = ref.functional_params
    canonical = tuple(
        CanonicalParam(
            canonical_name=normalize_param_name(p.name, aliases),
            abstract_type=p.abstract_type,
        )
        for p in ref_params
    )
    orders: dict[str, tuple[int, ...]] = {
        ref.source_id: tuple(range(len(canonical)))
    }
    for member in group.members[1:]:
        params = member.functional_params
        if len(params) != len(canonical):
            raise AlignmentError(
                f"{member.source_id}:{member.qualified_name}: {len(params)} functional "
                f"parameters vs {len(canonical)} canonical"
            )
        orders[member.source_id] = _match_member(canonical, member, params, aliases)
    return AlignedSignature(canonical_params=canonical, per_member_order=orders)


def permute_args(args: tuple, order: tuple[int, ...]) -> tuple:
    """Place canonical argument i at member position order[i]."""
    if len(args) != len(order):
        raise ValueError(f"{len(args)} args vs permutation of length {len(order)}")
    out: list = [None] * len(args)
    for i, j in enumerate(order):
        out[j] = args[i]
    return tuple(out)


def align_groups(
    groups: list[ApiGroup], aliases: dict[str, str] | None = None
) -> tuple[list[ApiGroup], list[str]]:
    """Attach alignments; unalignable groups are dropped with a diagnostic."""
    aligned_groups: list[ApiGroup] = []
    diagnostics: list[str] = []
    for group in groups:
        try:
            group.aligned = align_signature(group, aliases)
            aligned_groups.append(group)
        except AlignmentError as exc:
            diagnostics.append(f"{group.group_id}: {exc}")
    return aligned_groups, diagnostics
