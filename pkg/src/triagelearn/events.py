"""Domain types for security events, ticks, and the append-only history store.

A tick groups the set of open (reported, undecided) event instances with the
administrator's priorities and the engine's stored predictions for that time
point. The history database only ever grows; queries never mutate it.

The on-disk form is one JSON object per line with canonical key order, so a
replayed run writes byte-identical files. Floats render with full round-trip
precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import (
    DuplicateInstanceInTick,
    InstanceContinuityError,
    NonConsecutiveTick,
    ParseError,
    PreconditionViolated,
)


@dataclass(frozen=True, order=True)
class Priority:
    """Administrator-assigned urgency; larger means more urgent."""

    value: int

    def __post_init__(self):
        if not isinstance(self.value, int) or isinstance(self.value, bool):
            raise ValueError("priority must be an integer")
        if self.value < 1:
            raise ValueError("priority must be >= 1")


def as_priority(value) -> Priority:
    """Coerce an int or Priority to Priority."""
    if isinstance(value, Priority):
        return value
    return Priority(int(value))


@dataclass(frozen=True)
class ViolationType:
    """A category of events sharing one factor schema and one regression model.

    Schema position 0 is reserved for the constant intercept factor.
    """

    type_id: str
    factor_schema: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "factor_schema", tuple(self.factor_schema))
        if len(self.factor_schema) < 1:
            raise ValueError("factor schema needs at least the intercept slot")
        if len(set(self.factor_schema)) != len(self.factor_schema):
            raise ValueError(f"duplicate factor names in schema for {self.type_id!r}")

    @property
    def n_factors(self) -> int:
        return len(self.factor_schema)


@dataclass(frozen=True)
class EventInstance:
    """One reported, unresolved security event at a given tick.

    ``factors`` is aligned to the type's schema; position 0 is always 1.0.
    Factor values may change from tick to tick for the same instance.
    """

    instance_id: str
    type_id: str
    first_reported: int
    factors: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(float(v) for v in self.factors))
        if not self.factors or self.factors[0] != 1.0:
            raise ValueError(
                f"{self.instance_id!r}: factors[0] must be the constant 1.0"
            )
        if not all(math.isfinite(v) for v in self.factors):
            raise ValueError(f"{self.instance_id!r}: factors must be finite")
        if self.first_reported < 0:
            raise ValueError("first_reported must be a tick index")


@dataclass(frozen=True)
class TickRecord:
    """The open-event set at one tick plus priorities and stored predictions."""

    tick: int
    events: tuple[EventInstance, ...]
    sa_priorities: Mapping[str, Priority]
    predictions: Mapping[str, float]
    resolved: frozenset[str]

    def __post_init__(self):
        events = tuple(sorted(self.events, key=lambda e: e.instance_id))
        object.__setattr__(self, "events", events)
        object.__setattr__(
            self,
            "sa_priorities",
            {k: as_priority(v) for k, v in sorted(self.sa_priorities.items())},
        )
        object.__setattr__(
            self, "predictions", {k: float(v) for k, v in sorted(self.predictions.items())}
        )
        object.__setattr__(self, "resolved", frozenset(self.resolved))

        ids = [e.instance_id for e in events]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicateInstanceInTick(f"tick {self.tick}: duplicate ids {dupes}")
        id_set = set(ids)
        for name, keys in (
            ("sa_priorities", self.sa_priorities),
            ("predictions", self.predictions),
        ):
            extra = set(keys) - id_set
            if extra:
                raise PreconditionViolated(
                    f"tick {self.tick}: {name} keyed by non-members {sorted(extra)}"
                )
        extra = self.resolved - id_set
        if extra:
            raise PreconditionViolated(
                f"tick {self.tick}: resolved ids not in events {sorted(extra)}"
            )
        for e in events:
            if e.first_reported > self.tick:
                raise PreconditionViolated(
                    f"{e.instance_id!r} first_reported after tick {self.tick}"
                )
        for v in self.predictions.values():
            if not math.isfinite(v):
                raise PreconditionViolated("predictions must be finite")

    def instance_ids(self) -> frozenset[str]:
        return frozenset(e.instance_id for e in self.events)

    def event(self, instance_id: str) -> EventInstance:
        for e in self.events:
            if e.instance_id == instance_id:
                return e
        raise KeyError(instance_id)


class HistoryDB:
    """Append-only ordered store of tick records.

    Single writer, any number of readers: appended records are immutable and
    queries only touch committed state. An internal per-instance tick index
    keeps shared-history lookups proportional to an instance's lifetime.
    """

    def __init__(self, records: Iterable[TickRecord] = ()):
        self._ticks: list[TickRecord] = []
        self._presence: dict[str, list[int]] = {}
        for record in records:
            self.append_tick(record)

    @property
    def current_tick(self) -> int:
        """Index of the newest record, -1 when empty."""
        return len(self._ticks) - 1

    def __len__(self) -> int:
        return len(self._ticks)

    def __iter__(self) -> Iterator[TickRecord]:
        return iter(self._ticks)

    def record(self, tick: int) -> TickRecord:
        if not 0 <= tick < len(self._ticks):
            raise PreconditionViolated(f"no record for tick {tick}")
        return self._ticks[tick]

    def events_at(self, tick: int) -> frozenset[str]:
        return self.record(tick).instance_ids()

    def append_tick(self, record: TickRecord) -> "HistoryDB":
        """Append the next consecutive record; prior records are untouched."""
        expected = self.current_tick + 1
        if record.tick != expected:
            raise NonConsecutiveTick(
                f"expected tick {expected}, got {record.tick}"
            )
        self._check_continuity(record)
        self._ticks.append(record)
        for e in record.events:
            self._presence.setdefault(e.instance_id, []).append(record.tick)
        return self

    def _check_continuity(self, record: TickRecord):
        """Unresolved instances persist every tick; ids are never reborn."""
        prev_open: frozenset[str] = frozenset()
        if self._ticks:
            prev = self._ticks[-1]
            prev_open = prev.instance_ids() - prev.resolved
        now = record.instance_ids()
        missing = prev_open - now
        if missing:
            raise InstanceContinuityError(
                f"tick {record.tick}: unresolved instances absent {sorted(missing)}"
            )
        for e in record.events:
            if e.first_reported == record.tick:
                if e.instance_id in self._presence:
                    raise InstanceContinuityError(
                        f"instance id {e.instance_id!r} reused at tick {record.tick}"
                    )
            elif e.instance_id not in prev_open:
                raise InstanceContinuityError(
                    f"{e.instance_id!r} claims history but was not open at tick "
                    f"{record.tick - 1}"
                )

    def shared_history_ticks(self, t: int, instance_id: str) -> list[int]:
        """All past ticks u < t at which the instance was present, ascending."""
        if t > self.current_tick + 1:
            raise PreconditionViolated(
                f"tick {t} is beyond the stored history plus one"
            )
        ticks = self._presence.get(instance_id, [])
        return [u for u in ticks if u < t]

    def shared_events(
        self,
        t: int,
        u: int,
        instance_id: str,
        chi_t: frozenset[str] | None = None,
    ) -> frozenset[str]:
        """Instances present both at past tick u and in the tick-t set, minus the instance.

        ``chi_t`` overrides the tick-t membership for queries made while tick t
        is still being assembled; otherwise it is read from the stored record.
        """
        if u >= t:
            raise PreconditionViolated(f"u={u} must precede t={t}")
        past = self.events_at(u)
        if instance_id not in past:
            raise PreconditionViolated(
                f"{instance_id!r} was not present at tick {u}"
            )
        if chi_t is None:
            chi_t = self.events_at(t)
        return (past & frozenset(chi_t)) - {instance_id}


# --- serialization -----------------------------------------------------------

def canonical_json(obj) -> str:
    """Compact JSON with sorted keys; floats keep full round-trip precision."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _event_to_obj(e: EventInstance) -> dict:
    return {
        "instance_id": e.instance_id,
        "type_id": e.type_id,
        "first_reported": e.first_reported,
        "factors": list(e.factors),
    }


def _event_from_obj(obj: dict) -> EventInstance:
    try:
        return EventInstance(
            instance_id=obj["instance_id"],
            type_id=obj["type_id"],
            first_reported=int(obj["first_reported"]),
            factors=tuple(obj["factors"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad event object: {exc}") from exc


def tick_record_to_json(record: TickRecord) -> str:
    return canonical_json(
        {
            "tick": record.tick,
            "events": [_event_to_obj(e) for e in record.events],
            "sa_priorities": {k: p.value for k, p in record.sa_priorities.items()},
            "predictions": dict(record.predictions),
            "resolved": sorted(record.resolved),
        }
    )


def tick_record_from_json(line: str) -> TickRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad history line: {exc}") from exc
    try:
        return TickRecord(
            tick=int(obj["tick"]),
            events=tuple(_event_from_obj(e) for e in obj["events"]),
            sa_priorities={k: Priority(int(v)) for k, v in obj["sa_priorities"].items()},
            predictions={k: float(v) for k, v in obj["predictions"].items()},
            resolved=frozenset(obj["resolved"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad history record: {exc}") from exc


def save_history(db: HistoryDB, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for record in db:
            fh.write(tick_record_to_json(record) + "\n")


def load_history(path) -> HistoryDB:
    path = Path(path)
    db = HistoryDB()
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                db.append_tick(tick_record_from_json(line))
    return db
