"""History-based priority corrections from ranking disagreements.

When the administrator and the engine order a pair of co-present events
differently, that pair is suspected of carrying global context the factor
model cannot see. This module detects those directionality mismatches,
accumulates the administrator's relative-priority mass over shared history,
and turns it into a nonnegative integer correction added to an event's
predicted priority.

All queries are pure reads over a history snapshot and depend only on ticks
strictly before the query tick, so past values never change as history grows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import MissingRecord, PreconditionViolated
from .events import HistoryDB, TickRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MismatchVerdict:
    """1 when the administrator and engine disagree on a pair's order, else 0."""

    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError("verdict must be 0 or 1")

    def __bool__(self) -> bool:
        return self.value == 1


def pair_mismatch(pri_v: int, pri_w: int, pred_v: float, pred_w: float) -> int:
    """Direction test: 0 when both differences share a strict sign, else 1.

    Equal administrator priorities count as a mismatch: the product is zero,
    which is not strictly positive.
    """
    return 0 if (pri_v - pri_w) * (pred_v - pred_w) > 0 else 1


def _stored(record: TickRecord, instance_id: str) -> tuple[int, float]:
    pri = record.sa_priorities.get(instance_id)
    pred = record.predictions.get(instance_id)
    if pri is None or pred is None:
        raise MissingRecord(
            f"tick {record.tick}: no stored priority/prediction for {instance_id!r}"
        )
    return pri.value, pred


def phi(db: HistoryDB, u: int, v: str, w: str) -> MismatchVerdict:
    """Directionality-mismatch verdict for instances v and w at past tick u."""
    if v == w:
        raise PreconditionViolated("mismatch test needs two distinct instances")
    record = db.record(u)
    present = record.instance_ids()
    if v not in present or w not in present:
        raise PreconditionViolated(f"{v!r} and {w!r} must both be present at tick {u}")
    pri_v, pred_v = _stored(record, v)
    pri_w, pred_w = _stored(record, w)
    return MismatchVerdict(pair_mismatch(pri_v, pri_w, pred_v, pred_w))


def _comparable(record: TickRecord, instance_id: str) -> tuple[int, float] | None:
    """Stored (priority, prediction) pair, or None when the tick has no priority."""
    pri = record.sa_priorities.get(instance_id)
    if pri is None:
        return None
    pred = record.predictions.get(instance_id)
    if pred is None:
        return None
    return pri.value, pred


def _tick_terms(
    db: HistoryDB, t: int, u: int, v: str, chi_t: frozenset[str]
) -> tuple[float, frozenset[str]]:
    """Priority mass and mismatch partners for instance v at past tick u.

    Partners without a stored priority at u are skipped: no comparison was
    possible then, so they contribute neither mass nor suspicion.
    """
    record = db.record(u)
    own = _comparable(record, v)
    if own is None:
        return 0.0, frozenset()
    pri_v, pred_v = own
    total = 0.0
    mismatched = set()
    for w in sorted(db.shared_events(t, u, v, chi_t)):
        other = _comparable(record, w)
        if other is None:
            continue
        pri_w, pred_w = other
        if pair_mismatch(pri_v, pri_w, pred_v, pred_w):
            mismatched.add(w)
            total += pri_v - pri_w
    return total, frozenset(mismatched)


def lambda_term(
    db: HistoryDB, t: int, u: int, v: str, chi_t: Iterable[str] | None = None
) -> float:
    """Administrator priority mass of v over mismatched partners at tick u.

    Zero when v was not present at u. May be negative when the administrator
    ranked v below the partners the engine disagreed about.
    """
    if u >= t:
        raise PreconditionViolated(f"u={u} must precede t={t}")
    if v not in db.events_at(u):
        return 0.0
    chi = _chi_ids(db, t, v, chi_t)
    total, _ = _tick_terms(db, t, u, v, chi)
    return total


def _chi_ids(
    db: HistoryDB, t: int, v: str, chi_t: Iterable[str] | None
) -> frozenset[str]:
    if chi_t is None:
        ids = db.events_at(t)
    else:
        ids = frozenset(chi_t)
    if v not in ids:
        raise PreconditionViolated(f"{v!r} is not in the tick-{t} working set")
    return ids


@dataclass(frozen=True)
class DeltaBreakdown:
    """Every intermediate of the correction, exposed for diagnostics."""

    lambda_by_tick: Mapping[int, float]
    theta_by_tick: Mapping[int, frozenset[str]]
    meta_count: int
    omega: frozenset[str]
    m_value: float
    n_value: float
    delta: int

    def __post_init__(self):
        union = frozenset().union(*self.theta_by_tick.values()) if self.theta_by_tick else frozenset()
        if union != self.omega:
            raise PreconditionViolated("omega must be the union of the theta sets")
        nonempty = sum(1 for s in self.theta_by_tick.values() if s)
        if nonempty != self.meta_count:
            raise PreconditionViolated("meta_count must count nonempty theta sets")
        if self.delta < 0:
            raise PreconditionViolated("delta is never negative")


def delta(
    db: HistoryDB, t: int, v: str, chi_t: Iterable[str] | None = None
) -> DeltaBreakdown:
    """Integer correction for instance v at tick t, with its full breakdown.

    ``chi_t`` supplies the tick-t working set while that tick is still being
    assembled; committed ticks can be queried without it. The correction is
    the ceiling of (average positive priority mass per mismatch tick) times
    (the fraction of the working set sharing mismatch history with v), and 0
    when there is no history or the accumulated mass is not positive.
    """
    chi = _chi_ids(db, t, v, chi_t)
    lambda_by_tick: dict[int, float] = {}
    theta_by_tick: dict[int, frozenset[str]] = {}
    for u in db.shared_history_ticks(t, v):
        total, mismatched = _tick_terms(db, t, u, v, chi)
        lambda_by_tick[u] = total
        theta_by_tick[u] = mismatched

    lambda_sum = sum(lambda_by_tick.values())
    meta_count = sum(1 for s in theta_by_tick.values() if s)
    omega = (
        frozenset().union(*theta_by_tick.values()) if theta_by_tick else frozenset()
    )
    m_value = lambda_sum / meta_count if meta_count else 0.0
    n_value = (len(omega) + 1) / len(chi)

    if t > 0 and lambda_sum > 0:
        if meta_count == 0:
            # unreachable if the definitions hold; guard the division anyway
            logger.warning(
                "positive mismatch mass with no mismatch ticks for %r at %d", v, t
            )
            value = 0
        else:
            value = math.ceil(m_value * n_value)
    else:
        value = 0

    return DeltaBreakdown(
        lambda_by_tick=lambda_by_tick,
        theta_by_tick=theta_by_tick,
        meta_count=meta_count,
        omega=omega,
        m_value=m_value,
        n_value=n_value,
        delta=value,
    )


def breakdown_to_obj(b: DeltaBreakdown) -> dict:
    """JSON-ready form of a breakdown for the diagnostics API."""
    return {
        "lambda_by_tick": {str(u): val for u, val in sorted(b.lambda_by_tick.items())},
        "theta_by_tick": {
            str(u): sorted(s) for u, s in sorted(b.theta_by_tick.items())
        },
        "meta_count": b.meta_count,
        "omega": sorted(b.omega),
        "m_value": b.m_value,
        "n_value": b.n_value,
        "delta": b.delta,
    }
