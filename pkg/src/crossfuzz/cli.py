"""Command-line front end.

Subcommands cover the pipeline end to end:

* match: corpora in, matched+aligned group file out.
* fuzz: group file + backends in, findings/summary/manifest out.
* verify: executes clean seeds per group and reports PASS/FAIL agreement.
* replay: re-executes one stored finding and reports a verdict.

Exit codes: 0 = ran to completion (findings or FAILs are data, not
errors), 2 = usage or input-format problem, 3 = a backend or other
environment failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import hashlib
import json
import shlex
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .align import align_groups, load_alias_map
from .backends import (
    OK,
    BackendHandle,
    BackendUnavailable,
    WorkerBackend,
    reference_backend,
    REFERENCE_VARIANTS,
)
from .corpus import CorpusFormatError, load_corpus
from .engine import (
    CampaignConfig,
    CampaignError,
    CampaignStats,
    ConfigError,
    Finding,
    apply_oracles,
    execute_input,
    load_config,
    resolve_members,
    run_campaign,
)
from .matcher import (
    GroupFormatError,
    MatchStats,
    build_groups,
    read_group_file,
    write_group_file,
)
from .similarity import LexicalTfProvider, PrecomputedProvider, ProviderError
from .values import (
    SeedFactory,
    TENSOR,
    UnsupportedSignatureError,
    ValueIRError,
    validate_seed,
)

USAGE_ERROR = 2
ENVIRONMENT_ERROR = 3


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Backend specs


def parse_backend_specs(specs: Sequence[str]) -> dict[str, Callable[[], BackendHandle]]:
    """--backends SOURCE=KIND, where KIND is stable, flushties, or
    worker:<command line>. Returns factories so each shard can own fresh
    instances."""
    factories: dict[str, Callable[[], BackendHandle]] = {}
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"backend spec {spec!r} is not SOURCE=KIND")
        source, kind = spec.split("=", 1)
        source = source.strip()
        kind = kind.strip()
        if not source or not kind:
            raise ConfigError(f"backend spec {spec!r} is not SOURCE=KIND")
        if source in factories:
            raise ConfigError(f"duplicate backend for source {source!r}")
        if kind in REFERENCE_VARIANTS:
            factories[source] = (
                lambda variant=kind, sid=source: reference_backend(variant, backend_id=sid)
            )
        elif kind.startswith("worker:"):
            command = shlex.split(kind[len("worker:") :])
            if not command:
                raise ConfigError(f"empty worker command in {spec!r}")
            factories[source] = (
                lambda cmd=command, sid=source: WorkerBackend(sid, cmd)
            )
        else:
            raise ConfigError(f"unknown backend kind {kind!r} (stable, flushties, worker:CMD)")
    return factories


def _close_all(handles: dict[str, BackendHandle]) -> None:
    for handle in handles.values():
        handle.close()


# ---------------------------------------------------------------------------
# match


def cli_match(args: argparse.Namespace) -> int:
    try:
        corpora = [load_corpus(p) for p in args.corpus]
    except (OSError, CorpusFormatError) as exc:
        return _fail(USAGE_ERROR, str(exc))
    if len(corpora) < 2:
        return _fail(USAGE_ERROR, "need at least two corpora")
    by_source = {c.source_id: c for c in corpora}
    if len(by_source) != len(corpora):
        return _fail(USAGE_ERROR, "corpora must have distinct sources")
    if args.reference not in by_source:
        return _fail(USAGE_ERROR, f"reference source {args.reference!r} not among corpora")
    reference = by_source[args.reference]
    targets = [c for c in corpora if c.source_id != args.reference]

    try:
        if args.embeddings:
            provider = PrecomputedProvider(args.embeddings)
        else:
            provider = LexicalTfProvider.from_corpora(corpora)
        aliases = load_alias_map(args.aliases) if args.aliases else None
    except (OSError, ProviderError, ValueError) as exc:
        return _fail(USAGE_ERROR, str(exc))

    stats = MatchStats()
    try:
        groups = build_groups(reference, targets, provider, margin=args.margin, stats=stats)
    except ProviderError as exc:
        return _fail(USAGE_ERROR, str(exc))
    groups, diagnostics = align_groups(groups, aliases)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_group_file(groups, out, provider)

    print(
        f"matched {stats.groups} group(s) from {stats.references} reference records "
        f"({stats.stage1_candidates} name candidates, {stats.stage2_survivors} semantic "
        f"survivors, {stats.accepted} accepted)"
    )
    for diag in diagnostics:
        print(f"unalignable: {diag}", file=sys.stderr)
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# fuzz


def _shard(groups: list, jobs: int) -> list[list[tuple[int, object]]]:
    shards: list[list[tuple[int, object]]] = [[] for _ in range(jobs)]
    for idx, group in enumerate(groups):
        shards[idx % jobs].append((idx, group))
    return [s for s in shards if s]


def _fuzz_shard(
    shard: list,
    factories: dict[str, Callable[[], BackendHandle]],
    config: CampaignConfig,
) -> list[tuple[int, object, list[Finding], CampaignStats, str | None]]:
    handles = {source: make() for source, make in factories.items()}
    results = []
    try:
        for idx, group in shard:
            stats = CampaignStats()
            skip: str | None = None
            findings: list[Finding] = []
            try:
                findings = run_campaign(group, handles, config, stats=stats)
            except (CampaignError, UnsupportedSignatureError) as exc:
                skip = str(exc)
            results.append((idx, group, findings, stats, skip))
    finally:
        _close_all(handles)
    return results


def cli_fuzz(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config) if args.config else CampaignConfig()
        if args.seed is not None:
            config.master_seed = args.seed
        config.validate()
        factories = parse_backend_specs(args.backends)
        groups = read_group_file(args.groups)
    except (OSError, ConfigError, GroupFormatError) as exc:
        return _fail(USAGE_ERROR, str(exc))
    if not groups:
        return _fail(USAGE_ERROR, f"{args.groups}: no groups")

    jobs = max(1, args.jobs)
    shards = _shard(groups, jobs)
    merged: list = []
    try:
        if len(shards) == 1:
            merged = _fuzz_shard(shards[0], factories, config)
        else:
            with concurrent.futures.ThreadPoolExecutor(max_workers=len(shards)) as pool:
                futures = [pool.submit(_fuzz_shard, s, factories, config) for s in shards]
                for fut in futures:
                    merged.extend(fut.result())
    except BackendUnavailable as exc:
        return _fail(ENVIRONMENT_ERROR, str(exc))
    merged.sort(key=lambda item: item[0])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with (out / "findings.jsonl").open("w", encoding="utf-8") as fh:
        for _, _, findings, _, _ in merged:
            for finding in findings:
                fh.write(json.dumps(finding.to_wire(), sort_keys=True) + "\n")

    total = {"crash": 0, "nan": 0, "inconsistency": 0}
    lines = []
    with (out / "summary.jsonl").open("w", encoding="utf-8") as fh:
        for _, group, findings, stats, skip in merged:
            by_oracle = dict(sorted(stats.findings_by_oracle.items()))
            for oracle, n in by_oracle.items():
                total[oracle] = total.get(oracle, 0) + n
            record = {
                "group_id": group.group_id,
                "evals": stats.evals,
                "findings": by_oracle,
                "reseeds": stats.reseeds,
                "skipped": skip,
                "abort": stats.abort_reason,
                "members_skipped": stats.skipped_members,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            if skip:
                lines.append(f"{group.group_id}: skipped ({skip})")
            else:
                parts = ", ".join(f"{k}={v}" for k, v in by_oracle.items()) or "none"
                note = f" [aborted: {stats.abort_reason}]" if stats.abort_reason else ""
                lines.append(f"{group.group_id}: {stats.evals} evals, findings: {parts}{note}")

    summary_text = "\n".join(
        lines
        + [
            "total: "
            + ", ".join(f"{k}={v}" for k, v in sorted(total.items()))
        ]
    )
    (out / "summary.txt").write_text(summary_text + "\n", encoding="utf-8")

    manifest = {
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "tool_version": __version__,
        "config": config.to_dict(),
        "groups_file": {"path": str(args.groups), "sha256": _sha256(Path(args.groups))},
        "backends": {},
    }
    handles = {source: make() for source, make in factories.items()}
    try:
        manifest["backends"] = {source: h.describe() for source, h in handles.items()}
    finally:
        _close_all(handles)
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    print(summary_text)
    print(f"wrote {out}/findings.jsonl")
    return 0


# ---------------------------------------------------------------------------
# verify


def _pairwise_max_deviation(outcomes) -> float:
    """Largest elementwise |a-b| over backend pairs; NaN agreeing with NaN
    counts as zero, any structural disagreement as infinity."""
    shapes = set()
    for o in outcomes:
        shapes.add(tuple((v.dtype, v.shape) if v.kind == TENSOR else (v.kind,) for v in o.outputs))
    counts = {len(o.outputs) for o in outcomes}
    if len(counts) != 1:
        return float("inf")
    worst = 0.0
    n_pos = counts.pop()
    for pos in range(n_pos):
        rows = []
        for o in outcomes:
            v = o.outputs[pos]
            if v.kind == TENSOR:
                rows.append((v.shape, np.asarray(v.data, dtype=np.complex128)))
            else:
                rows.append(((), np.asarray([v.value], dtype=np.complex128)))
        if len({shape for shape, _ in rows}) != 1:
            return float("inf")
        for i in range(len(rows)):
            for j in range(i + 1, len(rows)):
                a, b = rows[i][1], rows[j][1]
                if a.size == 0:
                    continue
                both_nan = np.isnan(a) & np.isnan(b)
                either_nan = np.isnan(a) | np.isnan(b)
                diff = np.abs(a - b)
                diff[both_nan] = 0.0
                diff[either_nan & ~both_nan] = np.inf
                worst = max(worst, float(np.max(diff)))
    return worst


def cli_verify(args: argparse.Namespace) -> int:
    clean_base = CampaignConfig(edge_probability=0.0, structural_probability=0.0)
    try:
        config = load_config(args.config, base=clean_base) if args.config else clean_base
        if args.seed is not None:
            config.master_seed = args.seed
        config.validate()
        factories = parse_backend_specs(args.backends)
        groups = read_group_file(args.groups)
    except (OSError, ConfigError, GroupFormatError) as exc:
        return _fail(USAGE_ERROR, str(exc))

    try:
        handles = {source: make() for source, make in factories.items()}
    except BackendUnavailable as exc:
        return _fail(ENVIRONMENT_ERROR, str(exc))

    lines = []
    failures = 0
    try:
        for group in groups:
            if group.aligned is None:
                lines.append(f"FAIL {group.group_id}: no aligned signature")
                failures += 1
                continue
            members, skipped = resolve_members(group, handles)
            if len(members) < 2:
                lines.append(f"FAIL {group.group_id}: <2 executable members ({'; '.join(skipped)})")
                failures += 1
                continue
            try:
                factory = SeedFactory(
                    group.group_id,
                    group.aligned.canonical_params,
                    config.to_generator_config(),
                    config.master_seed,
                    api_name=group.reference.qualified_name,
                )
            except UnsupportedSignatureError as exc:
                lines.append(f"FAIL {group.group_id}: {exc}")
                failures += 1
                continue
            worst = 0.0
            reason = None
            for _ in range(args.samples):
                seed = factory.fresh()
                outcomes = execute_input(members, seed, group.aligned, config.timeout)
                bad = [o for o in outcomes if o.status != OK]
                if bad:
                    reason = f"{bad[0].backend_id}: {bad[0].status} ({bad[0].error})"
                    break
                worst = max(worst, _pairwise_max_deviation(outcomes))
            if reason is not None:
                lines.append(f"FAIL {group.group_id}: {reason}")
                failures += 1
            elif worst < args.tolerance:
                lines.append(f"PASS {group.group_id}: max_deviation={worst:.3e}")
            else:
                lines.append(f"FAIL {group.group_id}: max_deviation={worst:.3e}")
                failures += 1
    finally:
        _close_all(handles)

    report = "\n".join(lines + [f"total: {len(groups) - failures} pass, {failures} fail"])
    print(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.txt").write_text(report + "\n", encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# replay


def cli_replay(args: argparse.Namespace) -> int:
    try:
        records = [
            json.loads(line)
            for line in Path(args.finding).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(USAGE_ERROR, f"cannot read findings: {exc}")
    if not records:
        return _fail(USAGE_ERROR, f"{args.finding}: no finding records")
    if not 0 <= args.index < len(records):
        return _fail(USAGE_ERROR, f"--index {args.index} out of range (0..{len(records) - 1})")

    try:
        config = load_config(args.config) if args.config else CampaignConfig()
        finding = Finding.from_wire(records[args.index])
        groups = {g.group_id: g for g in read_group_file(args.groups)}
        factories = parse_backend_specs(args.backends)
    except (OSError, ConfigError, GroupFormatError, ValueIRError, KeyError) as exc:
        return _fail(USAGE_ERROR, f"invalid replay input: {exc}")

    group = groups.get(finding.group_id)
    if group is None or group.aligned is None:
        return _fail(USAGE_ERROR, f"group {finding.group_id!r} not in {args.groups}")
    try:
        validate_seed(finding.seed, group.aligned.canonical_params)
    except ValueIRError as exc:
        return _fail(USAGE_ERROR, f"stored trigger fails validation: {exc}")

    try:
        handles = {source: make() for source, make in factories.items()}
    except BackendUnavailable as exc:
        return _fail(ENVIRONMENT_ERROR, str(exc))
    try:
        members, skipped = resolve_members(group, handles)
        for s in skipped:
            print(f"skipping {s}", file=sys.stderr)
        if len(members) < 2:
            return _fail(ENVIRONMENT_ERROR, "fewer than two executable members")
        outcomes = execute_input(members, finding.seed, group.aligned, config.timeout)
    finally:
        _close_all(handles)

    for o in outcomes:
        detail = o.error if o.error else ""
        nan = " nan" if o.nan_present else ""
        print(f"{o.backend_id}: {o.status}{nan} {detail}".rstrip())
    refound, _ = apply_oracles(finding.group_id, finding.seed, outcomes, config)
    if refound is not None and refound.oracle == finding.oracle:
        print(f"verdict: reproduced ({refound.oracle})")
    elif refound is not None:
        print(f"verdict: different oracle ({refound.oracle} instead of {finding.oracle})")
    else:
        print("verdict: not reproduced")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossfuzz",
        description="Match equivalent APIs across documentation corpora and "
        "differential-fuzz the matched groups.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="build matched API groups from corpora")
    p.add_argument("--corpus", action="append", required=True, help="corpus JSONL (repeatable)")
    p.add_argument("--reference", required=True, help="source id of the reference corpus")
    p.add_argument("--embeddings", help="precomputed description vectors (JSONL sidecar)")
    p.add_argument("--aliases", help="parameter alias map file")
    p.add_argument("--margin", type=float, default=0.3, help="semantic dominance margin")
    p.add_argument("--out", required=True, help="output group file")
    p.set_defaults(func=cli_match)

    p = sub.add_parser("fuzz", help="run fuzzing campaigns over a group file")
    p.add_argument("--groups", required=True, help="group file from 'match'")
    p.add_argument(
        "--backends",
        action="append",
        required=True,
        metavar="SOURCE=KIND",
        help="stable | flushties | worker:<command> (repeatable)",
    )
    p.add_argument("--config", help="campaign config file (key = value lines)")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--jobs", type=int, default=1, help="parallel group shards")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cli_fuzz)

    p = sub.add_parser("verify", help="check cross-backend agreement on clean inputs")
    p.add_argument("--groups", required=True)
    p.add_argument("--backends", action="append", required=True, metavar="SOURCE=KIND")
    p.add_argument("--config", help="campaign config file")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--samples", type=int, default=10, help="seeds per group")
    p.add_argument("--tolerance", type=float, default=0.001, help="max allowed deviation")
    p.add_argument("--out", help="directory for verify.txt")
    p.set_defaults(func=cli_verify)

    p = sub.add_parser("replay", help="re-execute one stored finding")
    p.add_argument("--finding", required=True, help="findings.jsonl (or single-record file)")
    p.add_argument("--index", type=int, default=0, help="record index within the file")
    p.add_argument("--groups", required=True, help="group file the finding came from")
    p.add_argument("--backends", action="append", required=True, metavar="SOURCE=KIND")
    p.add_argument("--config", help="campaign config file")
    p.set_defaults(func=cli_replay)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
