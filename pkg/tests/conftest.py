import numpy as np
import pytest

from triagelearn.events import EventInstance, HistoryDB, Priority, TickRecord


def make_event(instance_id, tick, factors=(1.0,), type_id="t0", first_reported=None):
    return EventInstance(
        instance_id=instance_id,
        type_id=type_id,
        first_reported=tick if first_reported is None else first_reported,
        factors=factors,
    )


def build_random_history(rng, n_ticks, max_events=4, priority_levels=5):
    """A valid random history: persistence respected, priorities total.

    Returns the database; every event carries a random prediction so mismatch
    queries always have both sides stored.
    """
    db = HistoryDB()
    open_events = {}  # instance_id -> first_reported
    counter = 0
    for t in range(n_ticks):
        room = max_events - len(open_events)
        arrivals = int(rng.integers(0, room + 1)) if room > 0 else 0
        if t == 0 and arrivals == 0:
            arrivals = 1
        for _ in range(arrivals):
            open_events[f"e{counter}"] = t
            counter += 1
        ids = sorted(open_events)
        events = tuple(
            make_event(i, t, first_reported=open_events[i]) for i in ids
        )
        priorities = {
            i: Priority(int(rng.integers(1, priority_levels + 1))) for i in ids
        }
        predictions = {i: float(rng.normal()) for i in ids}
        resolved = frozenset(i for i in ids if rng.random() < 0.3)
        db.append_tick(
            TickRecord(
                tick=t,
                events=events,
                sa_priorities=priorities,
                predictions=predictions,
                resolved=resolved,
            )
        )
        for i in resolved:
            del open_events[i]
        if not open_events and t + 1 < n_ticks:
            open_events[f"e{counter}"] = t + 1
            counter += 1
    return db


def naive_delta_value(db, t, v, chi_t):
    """From-scratch literal evaluation of the correction and its parts.

    Independent of the incremental implementation: plain set algebra and
    arithmetic straight from the definitions.
    """
    import math

    chi_t = frozenset(chi_t)
    history_ticks = [
        u for u in range(t) if u <= db.current_tick and v in db.events_at(u)
    ]

    def mismatch(u, a, b):
        rec = db.record(u)
        if a not in rec.sa_priorities or b not in rec.sa_priorities:
            return None
        pa, pb = rec.sa_priorities[a].value, rec.sa_priorities[b].value
        qa, qb = rec.predictions[a], rec.predictions[b]
        return 0 if (pa - pb) * (qa - qb) > 0 else 1

    lam = {}
    theta = {}
    for u in history_ticks:
        shared = (db.events_at(u) & chi_t) - {v}
        total = 0.0
        bad = set()
        for w in shared:
            verdict = mismatch(u, v, w)
            if verdict is None:
                continue
            rec = db.record(u)
            total += verdict * (rec.sa_priorities[v].value - rec.sa_priorities[w].value)
            if verdict == 1:
                bad.add(w)
        lam[u] = total
        theta[u] = frozenset(bad)

    lam_sum = sum(lam.values())
    meta = [s for s in theta.values() if s]
    omega = frozenset().union(*meta) if meta else frozenset()
    if t > 0 and lam_sum > 0:
        m = lam_sum / len(meta)
        n = (len(omega) + 1) / len(chi_t)
        return math.ceil(m * n)
    return 0


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
