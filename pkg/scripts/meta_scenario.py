"""Walk through the proximity scenario where pure factors get the order wrong.

Four events sit at increasing distances from the control room; the factor
model ranks them by proximity alone. The administrator knows two sites share
a connection and keeps swapping a pair of them. Watch the engine flag the
pair after the first tick, accumulate the history correction, and converge
to the administrator's ordering.

Usage: python scripts/meta_scenario.py [--episodes N]
"""

import argparse

from triagelearn import (
    EventInstance,
    LinearOracle,
    MetaOracle,
    TriageEngine,
    ViolationType,
    run_stream,
)
from triagelearn.simulate import StreamTick


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=12)
    args = parser.parse_args()

    events = tuple(
        EventInstance(name, "prox", 0, (1.0, 1.0 / d))
        for name, d in (("v1", 1.0), ("v2", 2.0), ("v4", 3.0), ("v3", 4.0))
    )
    oracle = MetaOracle(
        base=LinearOracle(
            beta_star={"prox": (0.0, 1.0)}, noise_sigma=0.0, priority_levels=4
        ),
        override_pairs=(("v2", "v4"),),
    )
    engine = TriageEngine([ViolationType("prox", ("const", "proximity"))])

    for t in range(args.episodes):
        stream = [StreamTick(tick=t, events=events, resolved=frozenset())]
        (tick_report,) = run_stream(engine, stream, oracle)
        ranking = " > ".join(
            f"{e.instance_id}[f={e.f_value:.2f},d={e.delta}]"
            for e in tick_report.ranking.entries
        )
        flags = ",".join(sorted(engine.flags.flagged_ids())) or "-"
        print(f"tick {t:>2}: {ranking}   flagged: {flags}")
        if tick_report.newly_flagged:
            print(f"         mismatch latched: {', '.join(tick_report.newly_flagged)}")

    order = [e.instance_id for e in engine.last_report.ranking.entries]
    goal = ["v1", "v4", "v2", "v3"]
    print(f"\nfinal order {order} {'==' if order == goal else '!='} administrator {goal}")


if __name__ == "__main__":
    main()
