"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Every tolerance and runtime limit is asserted, not just reported.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

from conftest import build_random_history, naive_delta_value
from triagelearn import pls
from triagelearn.checkpoint import export_checkpoint, load_checkpoint, restore_engine
from triagelearn.cli import main as cli_main
from triagelearn.engine import TriageEngine, rank_events
from triagelearn.events import EventInstance, ViolationType
from triagelearn.meta import delta, pair_mismatch
from triagelearn.simulate import (
    LinearOracle,
    MetaOracle,
    StreamSpec,
    StreamTick,
    generate_stream,
    run_stream,
)


def report(number, name, passed, detail):
    print(f"[criterion {number}] {'PASS' if passed else 'FAIL'} {name}: {detail}")
    assert passed, f"criterion {number} ({name}): {detail}"


def test_criterion_1_ols_equivalence():
    rng = np.random.default_rng(101)
    beta_true = np.array([1.0, -2.0, 0.5, 3.0, -1.0])
    X = rng.normal(size=(100, 5))
    Y = X @ beta_true

    start = time.perf_counter()
    model = pls.nipals_fit(pls.DataBlock(X=X, Y=Y), epsilon=1e-10)
    beta = pls.extract_coefficients(model).beta
    elapsed = time.perf_counter() - start

    err = float(np.max(np.abs(beta - beta_true)))
    ols = np.linalg.solve(X.T @ X, X.T @ Y)  # normal-equations oracle
    err_ols = float(np.max(np.abs(beta - ols)))
    passed = err <= 1e-6 and err_ols <= 1e-6 and elapsed < 1.0
    report(
        1,
        "OLS equivalence",
        passed,
        f"max|beta-beta*|={err:.2e}<=1e-6, vs oracle {err_ols:.2e}, {elapsed:.3f}s<1s",
    )


def test_criterion_2_recursive_batch_agreement():
    rng = np.random.default_rng(202)
    n, k = 200, 5
    xs = rng.normal(size=(n, k))
    ys = xs @ rng.normal(size=k) + 0.2 * rng.normal(size=n)

    start = time.perf_counter()
    streamed = pls.fit_stream(list(zip(xs, ys)), n_factors=k, epsilon=1e-10)

    # independent replay of the augmentation cascade
    model = pls.cold_model(k, 1, 1e-10)
    for x, y in zip(xs, ys):
        rows_x = [c.p for c in model.components] + [x]
        rows_y = [[c.b * c.q[0]] for c in model.components] + [[y]]
        refit = pls.nipals_fit(
            pls.DataBlock(X=np.array(rows_x), Y=np.array(rows_y)), epsilon=1e-10
        )
        model = pls.PLSModel(
            n_factors=k,
            n_responses=1,
            components=refit.components,
            epsilon=1e-10,
            samples_absorbed=model.samples_absorbed + 1,
        )

    worst = 0.0
    for _ in range(50):
        probe = rng.normal(size=k)
        worst = max(worst, abs(pls.predict(streamed, probe) - pls.predict(model, probe)))
    elapsed = time.perf_counter() - start

    passed = worst <= 1e-6 and elapsed < 5.0
    report(
        2,
        "recursive/batch agreement",
        passed,
        f"max probe diff={worst:.2e}<=1e-6 over 50 probes, {elapsed:.2f}s<5s",
    )


def test_criterion_3_convergence_under_linear_oracle():
    start = time.perf_counter()
    spec = StreamSpec(
        types=1,
        factors_per_type=4,
        ticks=500,
        arrival_rate=1.0,
        resolution_rate=0.25,
        seed=424242,
    )
    beta_star = np.array([1.0, 4.0, -3.0, 2.5, 1.5])
    oracle = LinearOracle(
        beta_star={"type0": tuple(beta_star)},
        noise_sigma=0.1,
        priority_levels=10,
        seed=424243,
    )
    engine = TriageEngine(spec.violation_types())
    run_stream(engine, generate_stream(spec), oracle)

    predictions, scores = [], []
    for t in range(400, 500):
        record = engine.db.record(t)
        for e in record.events:
            predictions.append(record.predictions[e.instance_id])
            scores.append(float(np.asarray(e.factors) @ beta_star))
    rho = float(spearmanr(predictions, scores).correlation)
    elapsed = time.perf_counter() - start

    passed = rho >= 0.95 and elapsed < 30.0
    report(
        3,
        "convergence under linear oracle",
        passed,
        f"rank corr={rho:.4f}>=0.95 over last 100 ticks ({len(predictions)} "
        f"predictions), {elapsed:.2f}s<30s",
    )


def test_criterion_4_delta_oracle_equivalence():
    rng = np.random.default_rng(404)
    start = time.perf_counter()
    checked = 0
    for _ in range(1000):
        db = build_random_history(
            rng, int(rng.integers(1, 6)), max_events=4, priority_levels=5
        )
        for t in range(len(db)):
            chi = db.events_at(t)
            for v in sorted(chi):
                got = delta(db, t, v).delta
                want = naive_delta_value(db, t, v, chi)
                assert got == want, f"tick {t}, {v}: {got} != {want}"
                checked += 1
    elapsed = time.perf_counter() - start
    passed = elapsed < 10.0
    report(
        4,
        "correction oracle equivalence",
        passed,
        f"{checked} queries over 1000 random histories all matched exactly, "
        f"{elapsed:.2f}s<10s",
    )


def test_criterion_5_proximity_override_scenario():
    start = time.perf_counter()
    events = tuple(
        EventInstance(name, "prox", 0, (1.0, 1.0 / d))
        for name, d in (("v1", 1.0), ("v2", 2.0), ("v4", 3.0), ("v3", 4.0))
    )
    episodes = [
        StreamTick(tick=t, events=events, resolved=frozenset()) for t in range(21)
    ]
    oracle = MetaOracle(
        base=LinearOracle(
            beta_star={"prox": (0.0, 1.0)}, noise_sigma=0.0, priority_levels=4
        ),
        override_pairs=(("v2", "v4"),),
    )
    engine = TriageEngine([ViolationType("prox", ("const", "proximity"))])
    reports = run_stream(engine, episodes[:1], oracle)
    first_flags = set(reports[0].newly_flagged)

    reports += run_stream(engine, episodes[1:], oracle)
    fresh = rank_events(
        engine.registry, engine.db, engine.db.current_tick + 1, events
    )
    elapsed = time.perf_counter() - start

    passed = (
        first_flags == {"v2", "v4"}
        and engine.flags.flagged_ids() == {"v2", "v4"}
        and fresh.order() == ["v1", "v4", "v2", "v3"]
        and elapsed < 5.0
    )
    report(
        5,
        "proximity override scenario",
        passed,
        f"first episode flagged {sorted(first_flags)}, fresh-episode ranking "
        f"{fresh.order()}, {elapsed:.2f}s<5s",
    )


def test_criterion_6_deterministic_replay(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(
        json.dumps(
            {
                "types": 1,
                "factors_per_type": 3,
                "ticks": 100,
                "arrival_rate": 1.0,
                "resolution_rate": 0.3,
                "seed": 606,
            }
        )
    )
    stream_path = tmp_path / "stream.jsonl"
    assert cli_main(["simulate", "--spec", str(spec_path), "-o", str(stream_path)]) == 0
    lines = stream_path.read_text().strip().splitlines()
    (tmp_path / "first.jsonl").write_text("\n".join(lines[:50]) + "\n")
    (tmp_path / "second.jsonl").write_text("\n".join(lines[50:]) + "\n")

    def config_for(directory):
        directory.mkdir()
        path = directory / "config.json"
        path.write_text(
            json.dumps(
                {
                    "mode": "batch",
                    "history_path": str(directory / "history.jsonl"),
                    "checkpoint_path": str(directory / "checkpoint.json"),
                    "diagnostics_path": str(directory / "diagnostics.jsonl"),
                }
            )
        )
        return path

    single_config = config_for(tmp_path / "single")
    assert cli_main(["run", "--mode", "batch", "--stream", str(stream_path), "--config", str(single_config)]) == 0

    split_config = config_for(tmp_path / "split")
    assert cli_main(["run", "--mode", "batch", "--stream", str(tmp_path / "first.jsonl"), "--config", str(split_config)]) == 0
    assert cli_main(["run", "--mode", "batch", "--stream", str(tmp_path / "second.jsonl"), "--config", str(split_config)]) == 0

    single_bytes = (tmp_path / "single" / "history.jsonl").read_bytes()
    split_bytes = (tmp_path / "split" / "history.jsonl").read_bytes()
    histories_identical = single_bytes == split_bytes

    # export/import round trip: identical predictions at zero tolerance
    payload = load_checkpoint(tmp_path / "single" / "checkpoint.json")
    restored = restore_engine(payload)
    rng = np.random.default_rng(607)
    exact = True
    for _ in range(100):
        probe = np.concatenate([[1.0], rng.uniform(0, 1, size=3)])
        for type_id in payload["types"]:
            a = float(np.asarray(probe) @ np.asarray(_coeffs_for(payload, type_id)))
            b = float(probe @ restored.registry.coefficients_for(type_id))
            if a != b:
                exact = False

    passed = histories_identical and exact
    report(
        6,
        "deterministic replay",
        passed,
        f"split-run history bytes identical={histories_identical}, "
        f"100-probe round-trip exact={exact}",
    )


def _coeffs_for(payload, type_id):
    from triagelearn.checkpoint import model_from_obj

    entry = payload["types"][type_id]
    if entry["model"] is None:
        return [1.0] * len(entry["factor_schema"])
    return pls.extract_coefficients(model_from_obj(entry["model"])).beta


def test_criterion_7_mismatch_verdict_properties():
    assert pair_mismatch(5, 3, 4.2, 1.0) == 0  # agreement
    assert pair_mismatch(5, 3, 1.0, 4.2) == 1  # disagreement
    assert pair_mismatch(3, 3, 4.0, 1.0) == 1  # priority tie

    rng = np.random.default_rng(707)
    symmetric = True
    consistent = True
    for _ in range(10_000):
        pri_v, pri_w = int(rng.integers(1, 11)), int(rng.integers(1, 11))
        pred_v, pred_w = float(rng.normal()), float(rng.normal())
        a = pair_mismatch(pri_v, pri_w, pred_v, pred_w)
        b = pair_mismatch(pri_w, pri_v, pred_w, pred_v)
        if a != b:
            symmetric = False
        # independent statement of the rule, no multiplication
        strict_agree = (pri_v > pri_w and pred_v > pred_w) or (
            pri_v < pri_w and pred_v < pred_w
        )
        if a != (0 if strict_agree else 1):
            consistent = False
    passed = symmetric and consistent
    report(
        7,
        "mismatch verdict properties",
        passed,
        f"symmetry and branch semantics held on 10000 random tuples "
        f"(symmetric={symmetric}, consistent={consistent})",
    )
