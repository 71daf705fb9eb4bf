"""Variance-guided differential fuzzing over matched API groups.

Each evaluation runs one canonical input through every executable group
member and compares the outcomes. Float outputs are compared by
per-element population variance across backends (sigma2 is the max
element variance); integer outputs by exact-mismatch fraction. Three
oracles fire in precedence order: crash (some backends crash while
another succeeds), NaN (a strict subset of successful backends produces
NaN), inconsistency (structural mismatch, numeric variance over the
threshold, or any integer mismatch).

The guided strategy is a simulated-annealing walk: mutations of the
current input are kept when the score rises meaningfully and sometimes
kept when it falls (Metropolis on the scaled drop); the temperature both
scales tensor noise and decays with every accepted step. Twenty
non-improving evaluations in a row abandon the walk and reseed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .align import CanonicalParam, permute_args
from .backends import CRASH, ERROR, OK, BackendHandle, ExecutionOutcome
from .matcher import ApiGroup
from .values import (
    EDGE_VALUES,
    FLAG,
    INDEX_SCALAR,
    SHAPE,
    TENSOR,
    VALUE_SCALAR,
    GeneratorConfig,
    SeedFactory,
    SeedTuple,
    ValueIR,
    derive_seed,
    value_from_wire,
)

ORACLE_CRASH = "crash"
ORACLE_NAN = "nan"
ORACLE_INCONSISTENCY = "inconsistency"

_FLOAT_DTYPES = ("f32", "f64", "c64")


class ConfigError(ValueError):
    """A campaign configuration value or file is invalid."""


class CampaignError(RuntimeError):
    """The campaign cannot run at all (too few executable members)."""


@dataclass
class CampaignConfig:
    tests_per_group: int = 500
    stagnation_limit: int = 20
    min_improvement: float = 0.001
    inconsistency_threshold: float = 0.1
    initial_temperature: float = 0.1
    temperature_decay: float = 0.95
    temperature_floor: float = 1e-3
    master_seed: int = 0
    timeout: float = 10.0
    strategy: str = "guided"  # or "random"
    # input generation
    rank_min: int = 1
    rank_max: int = 4
    dim_max: int = 6
    tensor_dtypes: tuple[str, ...] = ("f32", "f64")
    edge_probability: float = 0.05
    structural_probability: float = 0.02
    flag_enumeration_limit: int = 4
    complex_apis: tuple[str, ...] = ()

    def validate(self) -> None:
        if self.tests_per_group < 1:
            raise ConfigError("tests_per_group must be >= 1")
        if self.stagnation_limit < 1:
            raise ConfigError("stagnation_limit must be >= 1")
        if self.min_improvement < 0:
            raise ConfigError("min_improvement must be >= 0")
        if self.inconsistency_threshold < 0:
            raise ConfigError("inconsistency_threshold must be >= 0")
        if self.initial_temperature <= 0:
            raise ConfigError("initial_temperature must be > 0")
        if not 0 < self.temperature_decay <= 1:
            raise ConfigError("temperature_decay must be in (0, 1]")
        if self.temperature_floor <= 0:
            raise ConfigError("temperature_floor must be > 0")
        if self.timeout <= 0:
            raise ConfigError("timeout must be > 0")
        if self.strategy not in ("guided", "random"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        try:
            self.to_generator_config().validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            rank_min=self.rank_min,
            rank_max=self.rank_max,
            dim_max=self.dim_max,
            tensor_dtypes=tuple(self.tensor_dtypes),
            edge_probability=self.edge_probability,
            structural_probability=self.structural_probability,
            flag_enumeration_limit=self.flag_enumeration_limit,
            complex_apis=frozenset(self.complex_apis),
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def load_config(path: str | Path, base: CampaignConfig | None = None) -> CampaignConfig:
    """Flat "key = value" file; '#' starts a comment.

    Ints, floats and true/false parse to their types; comma lists feed the
    tuple fields. Unknown keys are errors, not warnings: a typo that
    silently reverts a knob to its default would poison experiments.
    """
    cfg = replace(base) if base else CampaignConfig()
    known = {f.name: f for f in fields(CampaignConfig)}
    with Path(path).open("r", encoding="utf-8") as fh:
        for index, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{index}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"{path}:{index}: unknown key {key!r}")
            current = getattr(cfg, key)
            try:
                if isinstance(current, bool):
                    value: object = {"true": True, "false": False}[raw.lower()]
                elif isinstance(current, int):
                    value = int(raw)
                elif isinstance(current, float):
                    value = float(raw)
                elif isinstance(current, tuple):
                    value = tuple(p.strip() for p in raw.split(",") if p.strip())
                else:
                    value = raw
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"{path}:{index}: bad value for {key!r}: {raw!r}") from exc
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Output comparison


@dataclass
class VarianceResult:
    comparable: bool
    sigma2: float = 0.0  # max over output positions (variance or mismatch fraction)
    numeric_sigma2: float = 0.0
    mismatch_fraction: float = 0.0
    integer_mismatch: bool = False
    mean: np.ndarray | None = None  # concatenated over numeric output positions
    variance: np.ndarray | None = None
    note: str = ""


@dataclass
class DeviationVector:
    backend_ids: tuple[str, ...]
    deviations: np.ndarray  # (n_backends, L), numeric output positions concatenated


def _position_matrix(outcomes: Sequence[ExecutionOutcome], pos: int):
    """(class, shape, stacked rows) for one output position, or None."""
    rows = []
    shape = None
    cls = None
    for o in outcomes:
        assert o.outputs is not None
        v = o.outputs[pos]
        if v.kind == TENSOR:
            assert v.data is not None and v.shape is not None
            vshape: tuple = v.shape
            vcls = "float" if v.dtype in _FLOAT_DTYPES else "int"
            row = v.data
        elif v.kind == VALUE_SCALAR:
            vshape, vcls, row = (), "float", np.asarray([v.value], dtype=np.float64)
        elif v.kind in (INDEX_SCALAR, FLAG):
            vshape, vcls, row = (), "int", np.asarray([int(v.value)], dtype=np.int64)  # type: ignore[arg-type]
        elif v.kind == SHAPE:
            vshape = (len(v.value),)  # type: ignore[arg-type]
            vcls, row = "int", np.asarray(v.value, dtype=np.int64)
        else:
            return None
        if shape is None:
            shape, cls = vshape, vcls
        elif vshape != shape or vcls != cls:
            return None
        rows.append(row.reshape(-1))
    if cls == "float":
        complex_any = any(r.dtype.kind == "c" for r in rows)
        dtype = np.complex128 if complex_any else np.float64
        stack = np.vstack([r.astype(dtype) for r in rows])
    else:
        stack = np.vstack([r.astype(np.int64) for r in rows])
    return cls, shape, stack


def compute_variance(outcomes: Sequence[ExecutionOutcome]) -> VarianceResult:
    """Cross-backend comparison of successful, NaN-free outcomes.

    Requires >= 2 outcomes, each with outputs. Output positions must agree
    in count, shape and numeric class to be comparable at all.
    """
    if len(outcomes) < 2:
        raise ValueError("variance needs at least two outcomes")
    counts = {len(o.outputs) for o in outcomes if o.outputs is not None}
    if len(counts) != 1 or any(o.outputs is None for o in outcomes):
        return VarianceResult(comparable=False, note="output count mismatch")
    n_pos = counts.pop()
    numeric_sigma2 = 0.0
    mismatch_fraction = 0.0
    integer_mismatch = False
    means: list[np.ndarray] = []
    variances: list[np.ndarray] = []
    for pos in range(n_pos):
        got = _position_matrix(outcomes, pos)
        if got is None:
            return VarianceResult(comparable=False, note=f"output {pos}: shape or kind mismatch")
        cls, _, stack = got
        if stack.shape[1] == 0:
            continue
        if cls == "int":
            mismatch = (stack != stack[0]).any(axis=0)
            frac = float(np.mean(mismatch))
            mismatch_fraction = max(mismatch_fraction, frac)
            integer_mismatch = integer_mismatch or bool(mismatch.any())
        else:
            with np.errstate(all="ignore"):
                identical = np.all(stack == stack[0], axis=0)  # exact agreement, inf included
                mu = np.mean(stack, axis=0)
                var = np.mean(np.abs(stack - mu) ** 2, axis=0).astype(np.float64)
            var[identical] = 0.0
            var[np.isnan(var)] = np.inf  # inf disagreement overflows the moments
            means.append(mu)
            variances.append(var)
            if var.size:
                numeric_sigma2 = max(numeric_sigma2, float(np.max(var)))
    return VarianceResult(
        comparable=True,
        sigma2=max(numeric_sigma2, mismatch_fraction),
        numeric_sigma2=numeric_sigma2,
        mismatch_fraction=mismatch_fraction,
        integer_mismatch=integer_mismatch,
        mean=np.concatenate(means) if means else None,
        variance=np.concatenate(variances) if variances else None,
    )


def deviation_vector(
    outcomes: Sequence[ExecutionOutcome], variance: VarianceResult
) -> DeviationVector | None:
    """Per-backend deviation from the cross-backend mean, numeric outputs
    concatenated. Rows sum to ~zero column-wise by construction."""
    if not variance.comparable or variance.mean is None:
        return None
    n_pos = len(outcomes[0].outputs)  # type: ignore[arg-type]
    rows: list[list[np.ndarray]] = [[] for _ in outcomes]
    for pos in range(n_pos):
        got = _position_matrix(outcomes, pos)
        assert got is not None
        cls, _, stack = got
        if cls != "float" or stack.shape[1] == 0:
            continue
        for i in range(stack.shape[0]):
            rows[i].append(stack[i])
    if not rows[0]:
        return None
    flat = np.vstack([np.concatenate(r) for r in rows])
    with np.errstate(all="ignore"):
        deviations = flat - variance.mean[None, :]
    return DeviationVector(
        backend_ids=tuple(o.backend_id for o in outcomes),
        deviations=deviations,
    )


# ---------------------------------------------------------------------------
# Mutation and acceptance


def accept(
    old: float,
    new: float,
    temperature: float,
    rng: np.random.Generator,
    min_improvement: float = 0.001,
) -> bool:
    """Keep clear improvements always; otherwise Metropolis.

    new >= old + min_improvement is always kept. Any other new >= old has
    acceptance probability >= 1 under exp(-(old-new)/T) and is kept too.
    A drop survives with probability exp(-(old-new)/T); as T -> 0 that
    probability vanishes.
    """
    if new >= old + min_improvement or new >= old:
        return True
    if temperature <= 0:
        return False
    return float(rng.uniform()) < math.exp(-(old - new) / temperature)


def _current_rank(args: Sequence[ValueIR], scalar_pos: int) -> int:
    before = [a for a in args[:scalar_pos] if a.kind == TENSOR]
    if before:
        return max(len(before[-1].shape), 1)  # type: ignore[arg-type]
    for a in args:
        if a.kind == TENSOR:
            return max(len(a.shape), 1)  # type: ignore[arg-type]
    return 1


def mutate(
    seed: SeedTuple,
    deviation: DeviationVector | None,
    rng: np.random.Generator,
    temperature: float,
    canonical_params: Sequence[CanonicalParam],
    config: GeneratorConfig,
) -> SeedTuple:
    """One mutation, class chosen uniformly among those applicable.

    (a) gaussian tensor noise scaled by temperature and weighted by the
        most divergent backend's per-element deviation magnitudes,
    (b) flag toggle,
    (c) scalar nudge (value scalars scale by U[0.5,2], clamped to [0,1];
        index scalars resample within the associated tensor's rank),
    (d) edge value injected at one tensor element.
    """
    args = [a.copy() for a in seed.args]
    noise_targets = [
        i
        for i, a in enumerate(args)
        if a.kind == TENSOR and a.dtype in _FLOAT_DTYPES and a.data is not None and a.data.size
    ]
    flag_targets = [i for i, a in enumerate(args) if a.kind == FLAG]
    scalar_targets = [i for i, a in enumerate(args) if a.kind in (VALUE_SCALAR, INDEX_SCALAR)]
    edge_targets = [
        i for i, a in enumerate(args) if a.kind == TENSOR and a.data is not None and a.data.size
    ]
    classes = []
    if noise_targets:
        classes.append("a")
    if flag_targets:
        classes.append("b")
    if scalar_targets:
        classes.append("c")
    if edge_targets:
        classes.append("d")
    if not classes:
        return SeedTuple(seed.group_id, tuple(args), seed.rng_seed)
    cls = classes[int(rng.integers(len(classes)))]

    if cls == "a":
        i = noise_targets[int(rng.integers(len(noise_targets)))]
        t = args[i]
        assert t.data is not None
        size = t.data.size
        if t.dtype == "c64":
            g = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        else:
            g = rng.standard_normal(size)
        w = np.ones(size)
        if deviation is not None and deviation.deviations.size:
            mags = np.abs(deviation.deviations)
            k = int(np.argmax(np.max(mags, axis=1)))
            mag = mags[k]
            finite = np.where(np.isfinite(mag), mag, 0.0)
            if finite.size != size:
                finite = np.resize(finite, size)
            top = float(np.max(finite)) if finite.size else 0.0
            if top > 0:
                w = finite / top
        t.data = (t.data + temperature * g * w).astype(t.data.dtype)
    elif cls == "b":
        i = flag_targets[int(rng.integers(len(flag_targets)))]
        args[i] = ValueIR.flag(not args[i].value)
    elif cls == "c":
        i = scalar_targets[int(rng.integers(len(scalar_targets)))]
        a = args[i]
        if a.kind == VALUE_SCALAR:
            nv = min(max(a.value * float(rng.uniform(0.5, 2.0)), 0.0), 1.0)  # type: ignore[operator]
            if i < len(canonical_params) and canonical_params[i].abstract_type == "Int":
                nv = float(round(nv))
            args[i] = ValueIR.value_scalar(nv)
        else:
            rank = _current_rank(args, i)
            args[i] = ValueIR.index_scalar(int(rng.integers(0, rank)))
    else:
        i = edge_targets[int(rng.integers(len(edge_targets)))]
        t = args[i]
        assert t.data is not None and t.dtype is not None
        idx = int(rng.integers(t.data.size))
        edges = EDGE_VALUES[t.dtype]
        t.data[idx] = edges[int(rng.integers(len(edges)))]

    return SeedTuple(seed.group_id, tuple(args), seed.rng_seed)


# ---------------------------------------------------------------------------
# Oracles and findings


@dataclass(frozen=True)
class Finding:
    group_id: str
    oracle: str
    seed: SeedTuple
    outcomes: tuple[ExecutionOutcome, ...]
    diverging: tuple[str, ...]
    fingerprint: str
    sigma2: float | None = None
    eval_index: int = 0

    def to_wire(self) -> dict:
        return {
            "group_id": self.group_id,
            "oracle": self.oracle,
            "fingerprint": self.fingerprint,
            "diverging": list(self.diverging),
            "sigma2": self.sigma2,
            "eval_index": self.eval_index,
            "seed": self.seed.to_wire(),
            "outcomes": [o.to_wire() for o in self.outcomes],
        }

    @staticmethod
    def from_wire(raw: dict) -> "Finding":
        outcomes = tuple(
            ExecutionOutcome(
                backend_id=o["backend_id"],
                status=o["status"],
                outputs=tuple(value_from_wire(v) for v in o["outputs"])
                if o.get("outputs") is not None
                else None,
                error=o.get("error"),
                nan_present=bool(o.get("nan_present", False)),
            )
            for o in raw.get("outcomes", [])
        )
        return Finding(
            group_id=raw["group_id"],
            oracle=raw["oracle"],
            seed=SeedTuple.from_wire(raw["seed"]),
            outcomes=outcomes,
            diverging=tuple(raw.get("diverging", [])),
            fingerprint=raw["fingerprint"],
            sigma2=raw.get("sigma2"),
            eval_index=int(raw.get("eval_index", 0)),
        )


def _edge_classes(v: ValueIR) -> list[str]:
    if v.kind != TENSOR or v.data is None:
        return []
    classes = set()
    if v.data.size == 0:
        classes.add("empty")
    data = v.data
    if v.dtype in _FLOAT_DTYPES and data.size:
        if np.isnan(data).any():
            classes.add("nan")
        if np.isposinf(data.real).any() or (data.dtype.kind == "c" and np.isposinf(data.imag).any()):
            classes.add("pos_inf")
        if np.isneginf(data.real).any() or (data.dtype.kind == "c" and np.isneginf(data.imag).any()):
            classes.add("neg_inf")
        real = data.real
        if bool(np.any((real == 0) & np.signbit(real))):
            classes.add("neg_zero")
        finfo = np.finfo(np.float32 if v.dtype in ("f32", "c64") else np.float64)
        absr = np.abs(real[np.isfinite(real)])
        if bool(np.any((absr > 0) & (absr < finfo.tiny))):
            classes.add("denormal")
        if bool(np.any(absr >= 1e37)):
            classes.add("huge")
    if data.size > 1:
        finite = data[~np.isnan(data)] if v.dtype in _FLOAT_DTYPES else data
        if finite.size != np.unique(finite).size:
            classes.add("repeated")
    return sorted(classes)


def fingerprint(group_id: str, oracle: str, diverging: Sequence[str], seed: SeedTuple) -> str:
    """Coarse dedup key: re-finding the same behavior through a slightly
    different input should collapse to one finding."""
    coarse = [
        {
            "kind": a.kind,
            "dtype": a.dtype,
            "rank": len(a.shape) if a.shape is not None else None,
            "classes": _edge_classes(a),
        }
        for a in seed.args
    ]
    payload = json.dumps(
        [group_id, oracle, sorted(diverging), coarse], sort_keys=True, allow_nan=False
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def oracle_crash(outcomes: Sequence[ExecutionOutcome]) -> tuple[str, ...] | None:
    crashed = sorted(o.backend_id for o in outcomes if o.status == CRASH)
    succeeded = any(o.status == OK for o in outcomes)
    if crashed and succeeded:
        return tuple(crashed)
    return None


def oracle_nan(outcomes: Sequence[ExecutionOutcome]) -> tuple[str, ...] | None:
    ok = [o for o in outcomes if o.status == OK]
    with_nan = sorted(o.backend_id for o in ok if o.nan_present)
    if with_nan and len(with_nan) < len(ok):
        return tuple(with_nan)
    return None


def apply_oracles(
    group_id: str,
    seed: SeedTuple,
    outcomes: Sequence[ExecutionOutcome],
    config: CampaignConfig,
    eval_index: int = 0,
) -> tuple[Finding | None, VarianceResult | None]:
    """At most one finding per evaluation, crash > nan > inconsistency.

    Also returns the variance result (when one was computed) so the
    caller can reuse it for guidance.
    """

    def make(oracle: str, diverging: tuple[str, ...], sigma2: float | None) -> Finding:
        return Finding(
            group_id=group_id,
            oracle=oracle,
            seed=seed,
            outcomes=tuple(outcomes),
            diverging=diverging,
            fingerprint=fingerprint(group_id, oracle, diverging, seed),
            sigma2=sigma2,
            eval_index=eval_index,
        )

    crashed = oracle_crash(outcomes)
    if crashed is not None:
        return make(ORACLE_CRASH, crashed, None), None

    nan_div = oracle_nan(outcomes)
    if nan_div is not None:
        return make(ORACLE_NAN, nan_div, None), None

    ok = [o for o in outcomes if o.status == OK]
    if len(ok) < 2 or all(o.nan_present for o in ok):
        return None, None
    variance = compute_variance(ok)
    if not variance.comparable:
        diverging = tuple(sorted(o.backend_id for o in ok))
        return make(ORACLE_INCONSISTENCY, diverging, None), variance
    if variance.numeric_sigma2 >= config.inconsistency_threshold or variance.integer_mismatch:
        diverging = tuple(sorted(o.backend_id for o in ok))
        return make(ORACLE_INCONSISTENCY, diverging, variance.sigma2), variance
    return None, variance


# ---------------------------------------------------------------------------
# Campaign loop


@dataclass(frozen=True)
class ExecutableMember:
    source_id: str
    qualified_name: str
    api: str
    handle: BackendHandle


@dataclass
class CampaignStats:
    evals: int = 0
    accepted_steps: int = 0
    reseeds: int = 0
    findings_by_oracle: dict[str, int] = field(default_factory=dict)
    skipped_members: list[str] = field(default_factory=list)
    abort_reason: str | None = None


def resolve_members(
    group: ApiGroup, backends: Mapping[str, BackendHandle]
) -> tuple[list[ExecutableMember], list[str]]:
    """Pair group members with backends that expose them."""
    members: list[ExecutableMember] = []
    skipped: list[str] = []
    for rec in group.members:
        handle = backends.get(rec.source_id)
        if handle is None:
            skipped.append(f"{rec.source_id}: no backend configured")
            continue
        api = handle.resolve(rec.qualified_name)
        if api is None:
            skipped.append(f"{rec.source_id}: {rec.qualified_name!r} not in manifest")
            continue
        members.append(ExecutableMember(rec.source_id, rec.qualified_name, api, handle))
    return members, skipped


def execute_input(
    members: Sequence[ExecutableMember],
    seed: SeedTuple,
    aligned,
    timeout: float,
) -> list[ExecutionOutcome]:
    """Run one canonical input through every member, reordering arguments
    into each member's own parameter order."""
    outcomes = []
    for m in members:
        args = permute_args(seed.args, aligned.per_member_order[m.source_id])
        outcomes.append(m.handle.call(m.api, args, timeout))
    return outcomes


def run_campaign(
    group: ApiGroup,
    backends: Mapping[str, BackendHandle],
    config: CampaignConfig,
    stats: CampaignStats | None = None,
) -> list[Finding]:
    """Fuzz one group within its evaluation budget; deduplicated findings
    in discovery order. Deterministic for a fixed config and group."""
    config.validate()
    if group.aligned is None:
        raise CampaignError(f"{group.group_id}: group has no aligned signature")
    aligned = group.aligned
    members, skipped = resolve_members(group, backends)
    if stats is not None:
        stats.skipped_members.extend(skipped)
    if len(members) < 2:
        raise CampaignError(
            f"{group.group_id}: {len(members)} executable member(s); need at least 2"
        )

    gen_cfg = config.to_generator_config()
    factory = SeedFactory(
        group.group_id,
        aligned.canonical_params,
        gen_cfg,
        config.master_seed,
        api_name=group.reference.qualified_name,
    )
    mrng = np.random.default_rng(derive_seed(config.master_seed, group.group_id, "mutation"))

    findings: dict[str, Finding] = {}
    current: SeedTuple | None = None
    current_score = 0.0
    current_dev: DeviationVector | None = None
    temperature = config.initial_temperature
    stagnation = 0
    consecutive_all_error = 0
    pending = factory.fresh()

    for eval_index in range(config.tests_per_group):
        outcomes = execute_input(members, pending, aligned, config.timeout)
        if stats is not None:
            stats.evals += 1
        finding, variance = apply_oracles(group.group_id, pending, outcomes, config, eval_index)
        if finding is not None and finding.fingerprint not in findings:
            findings[finding.fingerprint] = finding
            if stats is not None:
                stats.findings_by_oracle[finding.oracle] = (
                    stats.findings_by_oracle.get(finding.oracle, 0) + 1
                )

        if all(o.status == ERROR for o in outcomes):
            consecutive_all_error += 1
            if consecutive_all_error >= config.stagnation_limit:
                if stats is not None:
                    stats.abort_reason = (
                        f"every backend returned an error on {consecutive_all_error} "
                        f"consecutive inputs"
                    )
                break
        else:
            consecutive_all_error = 0

        if config.strategy == "random":
            pending = factory.fresh()
            continue

        score = 0.0
        if variance is not None and variance.comparable and math.isfinite(variance.sigma2):
            score = variance.sigma2
        elif variance is not None and variance.comparable:
            score = float("inf")
        ok = [o for o in outcomes if o.status == OK]

        if current is None:
            current = pending
            current_score = score
            current_dev = deviation_vector(ok, variance) if variance is not None else None
            stagnation = 0
        else:
            improved = score >= current_score + config.min_improvement
            if accept(current_score, score, temperature, mrng, config.min_improvement):
                current = pending
                current_score = score
                current_dev = deviation_vector(ok, variance) if variance is not None else None
                temperature = max(
                    temperature * config.temperature_decay, config.temperature_floor
                )
                if stats is not None:
                    stats.accepted_steps += 1
            stagnation = 0 if improved else stagnation + 1
            if stagnation >= config.stagnation_limit:
                current = None
                temperature = config.initial_temperature
                stagnation = 0
                if stats is not None:
                    stats.reseeds += 1
                pending = factory.fresh()
                continue

        pending = mutate(
            current, current_dev, mrng, temperature, aligned.canonical_params, gen_cfg
        )

    return list(findings.values())
