"""Synthetic administrator oracles and event-stream generators.

Real triage data is hard to come by, so desk-scale validation runs against
a simulated administrator: a linear scorer with optional Gaussian noise,
quantized to priority levels by rank so that only relative order matters,
plus an override wrapper that swaps chosen pairs to mimic global context
the per-event factors cannot express.

Streams are deterministic under a seed, and factor values are drawn fresh
and independently at every tick.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engine import TickReport, TriageEngine
from .errors import InvalidSpec, ParseError, SchemaMismatch
from .events import EventInstance, Priority, ViolationType, canonical_json

DEFAULT_NOISE_SIGMA = 0.1
DEFAULT_PRIORITY_LEVELS = 10


def rank_bucket_priorities(ordered_ids: Sequence[str], levels: int) -> dict[str, Priority]:
    """Assign levels..1 down the given order; buckets share when the list is long."""
    n = len(ordered_ids)
    out = {}
    for i, instance_id in enumerate(ordered_ids):
        out[instance_id] = Priority(levels - (i * levels) // n)
    return out


@dataclass
class LinearOracle:
    """Administrator stand-in scoring events linearly per type.

    Priorities are quantized by rank bucket, not by score thresholds, so the
    emitted labels are a permutation-consistent relabeling of the scores:
    with zero noise the priority order always equals the score order.
    """

    beta_star: Mapping[str, Sequence[float]]
    noise_sigma: float = 0.0
    priority_levels: int = DEFAULT_PRIORITY_LEVELS
    seed: int | None = None
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise InvalidSpec("noise_sigma must be nonnegative")
        if self.priority_levels < 1:
            raise InvalidSpec("priority_levels must be positive")
        self.beta_star = {k: np.asarray(v, dtype=float) for k, v in self.beta_star.items()}
        self._rng = np.random.default_rng(self.seed)

    def score(self, event: EventInstance) -> float:
        """Noiseless linear score of one event."""
        beta = self.beta_star.get(event.type_id)
        if beta is None:
            raise SchemaMismatch(f"oracle has no coefficients for {event.type_id!r}")
        if beta.shape[0] != len(event.factors):
            raise SchemaMismatch(
                f"oracle coefficients for {event.type_id!r} expect "
                f"{beta.shape[0]} factors"
            )
        return float(np.asarray(event.factors) @ beta)

    def assign(self, chi_t: Iterable[EventInstance]) -> dict[str, Priority]:
        events = sorted(chi_t, key=lambda e: e.instance_id)
        if not events:
            return {}
        noisy = {}
        for e in events:
            s = self.score(e)
            if self.noise_sigma > 0:
                s += float(self._rng.normal(0.0, self.noise_sigma))
            noisy[e.instance_id] = s
        ordered = sorted(noisy, key=lambda i: (-noisy[i], i))
        return rank_bucket_priorities(ordered, self.priority_levels)


@dataclass
class MetaOracle:
    """Linear oracle plus pair overrides standing in for global knowledge.

    Each override names a pair of instance ids; whenever both are present in
    a tick, their assigned priorities are swapped (in listed order), changing
    only the relative order of the matched pair.
    """

    base: LinearOracle
    override_pairs: tuple[tuple[str, str], ...] = ()

    def assign(self, chi_t: Iterable[EventInstance]) -> dict[str, Priority]:
        out = self.base.assign(chi_t)
        for a, b in self.override_pairs:
            if a in out and b in out:
                out[a], out[b] = out[b], out[a]
        return out


def oracle_priorities(oracle, chi_t: Iterable[EventInstance]) -> dict[str, Priority]:
    """Priorities the simulated administrator assigns to a working set."""
    return oracle.assign(chi_t)


@dataclass(frozen=True)
class StreamSpec:
    """Shape of a synthetic stream; see the JSON file fields of the same names."""

    types: int
    factors_per_type: int
    ticks: int
    arrival_rate: float
    resolution_rate: float
    seed: int
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    priority_levels: int = DEFAULT_PRIORITY_LEVELS
    beta_star: Mapping[str, Sequence[float]] | None = None

    def __post_init__(self):
        if self.types < 1 or self.factors_per_type < 1 or self.ticks < 0:
            raise InvalidSpec("types, factors_per_type must be >= 1 and ticks >= 0")
        if self.arrival_rate < 0 or not 0 <= self.resolution_rate <= 1:
            raise InvalidSpec(
                "arrival_rate must be >= 0 and resolution_rate within [0, 1]"
            )
        if self.noise_sigma < 0 or self.priority_levels < 1:
            raise InvalidSpec("bad oracle settings")

    @property
    def n_factors(self) -> int:
        return self.factors_per_type + 1  # constant intercept in slot 0

    def type_ids(self) -> list[str]:
        return [f"type{i}" for i in range(self.types)]

    def violation_types(self) -> list["ViolationType"]:
        schema = ("const",) + tuple(f"f{i}" for i in range(1, self.n_factors))
        return [
            ViolationType(type_id=t, factor_schema=schema) for t in self.type_ids()
        ]


@dataclass(frozen=True)
class StreamTick:
    """One generated tick: open events with fresh factors, and who resolves."""

    tick: int
    events: tuple[EventInstance, ...]
    resolved: frozenset[str]


def generate_stream(spec: StreamSpec, seed: int | None = None) -> list[StreamTick]:
    """Deterministic synthetic stream under the given (or the spec's) seed.

    Arrivals are Poisson, resolution is a per-event coin flip, and every open
    event gets factor values redrawn independently each tick. The first tick
    always opens at least one event.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    type_ids = spec.type_ids()
    open_events: dict[str, tuple[str, int]] = {}  # id -> (type_id, first_reported)
    counter = 0
    out: list[StreamTick] = []
    for t in range(spec.ticks):
        arrivals = int(rng.poisson(spec.arrival_rate))
        if t == 0:
            arrivals = max(1, arrivals)
        for _ in range(arrivals):
            type_id = type_ids[int(rng.integers(0, spec.types))]
            open_events[f"e{counter:05d}"] = (type_id, t)
            counter += 1
        events = []
        for instance_id in sorted(open_events):
            type_id, first = open_events[instance_id]
            factors = (1.0,) + tuple(rng.uniform(0.0, 1.0, size=spec.factors_per_type))
            events.append(
                EventInstance(
                    instance_id=instance_id,
                    type_id=type_id,
                    first_reported=first,
                    factors=factors,
                )
            )
        resolved = frozenset(
            i for i in sorted(open_events) if rng.random() < spec.resolution_rate
        )
        out.append(StreamTick(tick=t, events=tuple(events), resolved=resolved))
        for i in resolved:
            del open_events[i]
    return out


def default_oracle(spec: StreamSpec, ticks_seed_offset: int = 1) -> LinearOracle:
    """Oracle for a spec: stated coefficients, or reproducible random ones."""
    if spec.beta_star is not None:
        beta = {k: tuple(float(x) for x in v) for k, v in spec.beta_star.items()}
        for type_id in spec.type_ids():
            if type_id not in beta:
                raise InvalidSpec(f"beta_star is missing {type_id!r}")
    else:
        rng = np.random.default_rng(spec.seed + ticks_seed_offset)
        beta = {
            type_id: tuple(rng.uniform(-2.0, 2.0, size=spec.n_factors))
            for type_id in spec.type_ids()
        }
    return LinearOracle(
        beta_star=beta,
        noise_sigma=spec.noise_sigma,
        priority_levels=spec.priority_levels,
        seed=spec.seed + ticks_seed_offset + 1,
    )


def run_stream(
    engine: TriageEngine,
    stream: Iterable[StreamTick],
    oracle,
) -> list[TickReport]:
    """Drive an engine over a stream, asking the oracle for priorities each tick."""
    reports = []
    for st in stream:
        priorities = oracle_priorities(oracle, st.events)
        reports.append(
            engine.ingest_tick(st.events, priorities, resolved=st.resolved, tick=st.tick)
        )
    return reports


# --- priced stream files (ingestible by the batch runner) --------------------

@dataclass(frozen=True)
class PricedTick:
    """A stream tick with administrator priorities attached."""

    tick: int
    events: tuple[EventInstance, ...]
    sa_priorities: Mapping[str, Priority]
    resolved: frozenset[str]


def price_stream(stream: Iterable[StreamTick], oracle) -> list[PricedTick]:
    out = []
    for st in stream:
        out.append(
            PricedTick(
                tick=st.tick,
                events=st.events,
                sa_priorities=oracle_priorities(oracle, st.events),
                resolved=st.resolved,
            )
        )
    return out


def priced_tick_to_json(pt: PricedTick) -> str:
    return canonical_json(
        {
            "tick": pt.tick,
            "events": [
                {
                    "instance_id": e.instance_id,
                    "type_id": e.type_id,
                    "first_reported": e.first_reported,
                    "factors": list(e.factors),
                }
                for e in sorted(pt.events, key=lambda e: e.instance_id)
            ],
            "sa_priorities": {k: p.value for k, p in sorted(pt.sa_priorities.items())},
            "resolved": sorted(pt.resolved),
        }
    )


def priced_tick_from_json(line: str) -> PricedTick:
    try:
        obj = json.loads(line)
        return PricedTick(
            tick=int(obj["tick"]),
            events=tuple(
                EventInstance(
                    instance_id=e["instance_id"],
                    type_id=e["type_id"],
                    first_reported=int(e["first_reported"]),
                    factors=tuple(e["factors"]),
                )
                for e in obj["events"]
            ),
            sa_priorities={
                k: Priority(int(v)) for k, v in obj["sa_priorities"].items()
            },
            resolved=frozenset(obj["resolved"]),
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad stream line: {exc}") from exc


def save_priced_stream(ticks: Iterable[PricedTick], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for pt in ticks:
            fh.write(priced_tick_to_json(pt) + "\n")


def load_priced_stream(path) -> list[PricedTick]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(priced_tick_from_json(line))
    return out


def load_stream_spec(path) -> StreamSpec:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad stream spec: {exc}") from exc
    required = {
        "types",
        "factors_per_type",
        "ticks",
        "arrival_rate",
        "resolution_rate",
        "seed",
    }
    missing = required - set(obj)
    if missing:
        raise ParseError(f"stream spec missing fields: {sorted(missing)}")
    known = required | {"noise_sigma", "priority_levels", "beta_star"}
    unknown = set(obj) - known
    if unknown:
        raise ParseError(f"stream spec has unknown fields: {sorted(unknown)}")
    return StreamSpec(**obj)
