"""Per-tick learning loop: predict, update unflagged instances, flag mismatches.

Each ingested tick runs a fixed sequence. Predictions for every open event
are computed first, from the models as they stood before the tick. Instances
never caught in a directionality mismatch then feed the recursive update of
their type's model, using the administrator's priority minus the history
correction as the regression target. After the updates, every pair with at
least one unflagged member is tested for mismatch against the stored
predictions; a mismatch latches both instances out of all future updates.
Finally the tick is committed to the history database.

Replaying the same event stream reproduces the stored history byte for byte.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import pls
from .errors import (
    DimensionMismatch,
    MissingRecord,
    NonConsecutiveTick,
    SchemaMismatch,
    UnknownType,
)
from .events import (
    EventInstance,
    HistoryDB,
    Priority,
    TickRecord,
    ViolationType,
    as_priority,
)
from .meta import DeltaBreakdown, breakdown_to_obj, delta, pair_mismatch

logger = logging.getLogger(__name__)


@dataclass
class MismatchFlags:
    """Per-instance mismatch latch: once set, an instance never updates again."""

    flags: dict[str, bool] = field(default_factory=dict)

    def is_flagged(self, instance_id: str) -> bool:
        return self.flags.get(instance_id, False)

    def flag(self, instance_id: str) -> bool:
        """Latch an instance; returns True when this call newly set it."""
        if self.flags.get(instance_id, False):
            return False
        self.flags[instance_id] = True
        return True

    def forget(self, instance_id: str) -> None:
        """Drop a resolved instance; its lifetime is over."""
        self.flags.pop(instance_id, None)

    def snapshot(self, live_ids: Iterable[str]) -> dict[str, bool]:
        return {i: self.is_flagged(i) for i in sorted(live_ids)}

    def flagged_ids(self) -> frozenset[str]:
        return frozenset(i for i, v in self.flags.items() if v)


class ModelRegistry:
    """Violation types, their factor schemas, and one PLS model per type.

    Before a type's first fit its coefficients are all ones, so the linear
    term starts as the plain sum of an event's factor values.
    """

    def __init__(self, types: Iterable[ViolationType] = (), epsilon: float = pls.DEFAULT_EPSILON):
        self.epsilon = float(epsilon)
        self.types: dict[str, ViolationType] = {}
        self.models: dict[str, pls.PLSModel] = {}
        for vt in types:
            self.register_type(vt)

    def register_type(self, vt: ViolationType) -> None:
        if vt.type_id in self.types:
            raise SchemaMismatch(f"type {vt.type_id!r} already registered")
        self.types[vt.type_id] = vt

    def type_for(self, type_id: str) -> ViolationType:
        try:
            return self.types[type_id]
        except KeyError:
            raise UnknownType(f"no violation type {type_id!r}") from None

    def validate_event(self, event: EventInstance) -> None:
        vt = self.type_for(event.type_id)
        if len(event.factors) != vt.n_factors:
            raise SchemaMismatch(
                f"{event.instance_id!r}: {len(event.factors)} factors for schema "
                f"of {vt.n_factors} ({event.type_id!r})"
            )

    def coefficients_for(self, type_id: str) -> np.ndarray:
        """Fitted coefficients, or the all-ones cold vector before any fit."""
        vt = self.type_for(type_id)
        model = self.models.get(type_id)
        if model is None:
            return np.ones(vt.n_factors)
        return np.asarray(pls.extract_coefficients(model).beta)

    def update(self, type_id: str, x, y: float) -> None:
        vt = self.type_for(type_id)
        model = self.models.get(type_id)
        if model is None:
            model = pls.cold_model(vt.n_factors, 1, self.epsilon)
        self.models[type_id] = pls.rpls_update(model, x, y, self.epsilon)

    def reset_type(self, type_id: str, new_schema: Sequence[str]) -> None:
        """Drop the model and install a new schema; learning starts cold again."""
        self.type_for(type_id)
        self.types[type_id] = ViolationType(type_id=type_id, factor_schema=tuple(new_schema))
        self.models.pop(type_id, None)


def merge_models(ours: pls.PLSModel, theirs: pls.PLSModel) -> pls.PLSModel:
    """Keep whichever model absorbed more samples; ties keep ours. Pure selection."""
    if ours.n_factors != theirs.n_factors:
        raise DimensionMismatch(
            f"cannot merge models over {ours.n_factors} vs {theirs.n_factors} factors"
        )
    return theirs if theirs.samples_absorbed > ours.samples_absorbed else ours


@dataclass(frozen=True)
class RankEntry:
    instance_id: str
    f_value: float
    delta: int
    linear_term: float

    def __post_init__(self):
        if self.f_value != self.linear_term + self.delta:
            raise ValueError("f_value must equal linear_term + delta")


@dataclass(frozen=True)
class RankedList:
    """Entries in descending predicted priority; ties break toward older, then
    lexicographically smaller, instance ids."""

    entries: tuple[RankEntry, ...]

    def order(self) -> list[str]:
        return [e.instance_id for e in self.entries]


def sort_ranked(entries: Iterable[tuple[RankEntry, int]]) -> RankedList:
    """Sort (entry, first_reported) pairs into a RankedList."""
    ordered = sorted(
        entries, key=lambda pair: (-pair[0].f_value, pair[1], pair[0].instance_id)
    )
    return RankedList(entries=tuple(e for e, _ in ordered))


@dataclass(frozen=True)
class TickReport:
    """What one ingested tick did, in a serializable form."""

    tick: int
    updated_types: tuple[str, ...]
    newly_flagged: tuple[str, ...]
    ranking: RankedList


def report_to_obj(report: TickReport) -> dict:
    return {
        "tick": report.tick,
        "updated_types": list(report.updated_types),
        "newly_flagged": list(report.newly_flagged),
        "ranking": [
            {
                "instance_id": e.instance_id,
                "f_value": e.f_value,
                "delta": e.delta,
                "linear_term": e.linear_term,
            }
            for e in report.ranking.entries
        ],
    }


def predict_priority(
    registry: ModelRegistry,
    db: HistoryDB,
    t: int,
    event: EventInstance,
    chi_t: Iterable[str],
) -> tuple[float, DeltaBreakdown]:
    """Predicted priority for one event: linear term plus the history correction.

    The returned value is what gets stored as the event's prediction when the
    tick commits.
    """
    registry.validate_event(event)
    beta = registry.coefficients_for(event.type_id)
    linear = float(np.asarray(event.factors) @ beta)
    breakdown = delta(db, t, event.instance_id, chi_t)
    return linear + breakdown.delta, breakdown


def rank_events(
    registry: ModelRegistry,
    db: HistoryDB,
    t: int,
    chi_t: Iterable[EventInstance],
) -> RankedList:
    """Rank a working set by predicted priority. Pure: no state changes."""
    events = sorted(chi_t, key=lambda e: e.instance_id)
    ids = frozenset(e.instance_id for e in events)
    pairs = []
    for e in events:
        f, breakdown = predict_priority(registry, db, t, e, ids)
        entry = RankEntry(
            instance_id=e.instance_id,
            f_value=f,
            delta=breakdown.delta,
            linear_term=f - breakdown.delta,
        )
        pairs.append((entry, e.first_reported))
    return sort_ranked(pairs)


def history_adapted_response(
    db: HistoryDB,
    t: int,
    instance_id: str,
    sa_priority: Priority | int,
    chi_t: Iterable[str] | None = None,
) -> float:
    """Regression target: assigned priority minus the history correction.

    May be negative; the learner accepts it as-is.
    """
    pri = as_priority(sa_priority)
    return float(pri.value - delta(db, t, instance_id, chi_t).delta)


class TriageEngine:
    """Owns the registry, the mismatch latch, and the history database.

    One ingest is one transaction; callers serialize concurrent ingests.
    """

    def __init__(
        self,
        types: Iterable[ViolationType] = (),
        epsilon: float = pls.DEFAULT_EPSILON,
        auto_register: bool = False,
    ):
        self.registry = ModelRegistry(types, epsilon=epsilon)
        self.flags = MismatchFlags()
        self.db = HistoryDB()
        self.auto_register = auto_register
        self.last_report: TickReport | None = None

    @property
    def current_tick(self) -> int:
        return self.db.current_tick

    def open_events(self) -> tuple[EventInstance, ...]:
        """Events from the last tick that have not been resolved."""
        if self.db.current_tick < 0:
            return ()
        record = self.db.record(self.db.current_tick)
        return tuple(e for e in record.events if e.instance_id not in record.resolved)

    def _maybe_register(self, event: EventInstance) -> None:
        if event.type_id in self.registry.types:
            return
        if not self.auto_register:
            raise UnknownType(f"no violation type {event.type_id!r}")
        schema = ("const",) + tuple(f"f{i}" for i in range(1, len(event.factors)))
        self.registry.register_type(
            ViolationType(type_id=event.type_id, factor_schema=schema)
        )
        logger.info("auto-registered type %r with %d factors", event.type_id, len(schema))

    def ingest_tick(
        self,
        events: Iterable[EventInstance],
        sa_priorities: Mapping[str, Priority | int],
        resolved: Iterable[str] = (),
        tick: int | None = None,
    ) -> TickReport:
        """Process one tick end to end and commit it to history."""
        t = self.db.current_tick + 1
        if tick is not None and tick != t:
            raise NonConsecutiveTick(f"expected tick {t}, got {tick}")
        events = tuple(sorted(events, key=lambda e: e.instance_id))
        for e in events:
            self._maybe_register(e)
            self.registry.validate_event(e)
        ids = frozenset(e.instance_id for e in events)
        priorities = {k: as_priority(v) for k, v in sa_priorities.items()}
        unknown = set(priorities) - ids
        if unknown:
            raise MissingRecord(
                f"priorities for instances not in the tick: {sorted(unknown)}"
            )
        unpriced = sorted(ids - set(priorities))
        if unpriced:
            logger.warning(
                "tick %d: no administrator priority for %s; excluded from "
                "updates and mismatch checks this tick",
                t,
                unpriced,
            )

        # 1. predictions from the pre-update models and the history prefix
        alphas: dict[str, float] = {}
        breakdowns: dict[str, DeltaBreakdown] = {}
        pre_entries = []
        for e in events:
            f, breakdown = predict_priority(self.registry, self.db, t, e, ids)
            alphas[e.instance_id] = f
            breakdowns[e.instance_id] = breakdown
            pre_entries.append(
                (
                    RankEntry(
                        instance_id=e.instance_id,
                        f_value=f,
                        delta=breakdown.delta,
                        linear_term=f - breakdown.delta,
                    ),
                    e.first_reported,
                )
            )
        pre_ranking = sort_ranked(pre_entries)

        # 2. unflagged, priced instances are eligible for model updates
        by_id = {e.instance_id: e for e in events}
        eligible = [
            by_id[i]
            for i in pre_ranking.order()
            if not self.flags.is_flagged(i) and i in priorities
        ]

        # 3. recursive updates, same-type instances in ranking order
        updated_types: set[str] = set()
        for e in eligible:
            target = priorities[e.instance_id].value - breakdowns[e.instance_id].delta
            self.registry.update(e.type_id, np.asarray(e.factors), float(target))
            updated_types.add(e.type_id)

        # 4. pairwise mismatch pass against the stored predictions
        newly_flagged: list[str] = []
        priced_ids = sorted(set(priorities))
        for i, v in enumerate(priced_ids):
            for w in priced_ids[i + 1 :]:
                if self.flags.is_flagged(v) and self.flags.is_flagged(w):
                    continue
                verdict = pair_mismatch(
                    priorities[v].value, priorities[w].value, alphas[v], alphas[w]
                )
                if verdict == 1:
                    for name in (v, w):
                        if self.flags.flag(name):
                            newly_flagged.append(name)

        # 5. commit
        record = TickRecord(
            tick=t,
            events=events,
            sa_priorities=priorities,
            predictions=alphas,
            resolved=frozenset(resolved),
        )
        self.db.append_tick(record)
        for i in record.resolved:
            self.flags.forget(i)

        post_entries = []
        for e in events:
            beta = self.registry.coefficients_for(e.type_id)
            linear = float(np.asarray(e.factors) @ beta)
            d = breakdowns[e.instance_id].delta
            post_entries.append(
                (
                    RankEntry(
                        instance_id=e.instance_id,
                        f_value=linear + d,
                        delta=d,
                        linear_term=linear,
                    ),
                    e.first_reported,
                )
            )
        report = TickReport(
            tick=t,
            updated_types=tuple(sorted(updated_types)),
            newly_flagged=tuple(sorted(newly_flagged)),
            ranking=sort_ranked(post_entries),
        )
        self.last_report = report
        return report

    def reset_type_model(self, type_id: str, new_schema: Sequence[str]) -> None:
        """Restart estimation for one type; history is kept for corrections."""
        self.registry.reset_type(type_id, new_schema)

    def rank_current(self) -> RankedList:
        if self.last_report is None:
            return RankedList(entries=())
        return self.last_report.ranking

    def delta_breakdown(self, instance_id: str) -> dict:
        """Diagnostics view of the correction for an instance of the last tick."""
        t = self.db.current_tick
        if t < 0 or instance_id not in self.db.events_at(t):
            raise MissingRecord(f"{instance_id!r} is not in the last committed tick")
        return breakdown_to_obj(delta(self.db, t, instance_id))
