"""Operational shell: configuration, batch/online execution, HTTP API.

Batch mode ingests a priced stream file tick by tick, appending each
committed tick to the history file and writing a final checkpoint. Online
mode serves the same engine behind an HTTP API; every submitted tick is one
exclusive transaction, and reads always see the last committed state.

Both modes resume from an existing history file: learned state comes from
the checkpoint when present, otherwise it is rebuilt by replaying the
history itself (verifying stored predictions along the way). A batch run
and an online run fed the same tick sequence produce identical history
files.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from . import checkpoint as ckpt
from .engine import TickReport, TriageEngine, report_to_obj
from .errors import (
    BusyError,
    InputError,
    InternalInvariantError,
    MissingRecord,
    ParseError,
    UnknownType,
)
from .events import (
    EventInstance,
    ViolationType,
    load_history,
    tick_record_to_json,
)
from .simulate import PricedTick, load_priced_stream

logger = logging.getLogger(__name__)

DEFAULT_LISTEN = "127.0.0.1:8750"


@dataclass(frozen=True)
class EngineConfig:
    """Runtime settings; mirrors the JSON config file field for field."""

    mode: str = "batch"
    update_period: str | float = "manual"
    epsilon: float = 1e-8
    history_path: str = "history.jsonl"
    checkpoint_path: str = "checkpoint.json"
    diagnostics_path: str = "diagnostics.jsonl"
    listen_address: str = DEFAULT_LISTEN
    types: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    ui_dist: str | None = None

    def __post_init__(self):
        if self.mode not in ("batch", "online"):
            raise ParseError(f"mode must be 'batch' or 'online', got {self.mode!r}")
        if self.epsilon < 0:
            raise ParseError("epsilon must be nonnegative")
        if isinstance(self.update_period, str) and self.update_period != "manual":
            raise ParseError("update_period is a number of seconds or 'manual'")

    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen_address.rpartition(":")
        if not host or not port.isdigit():
            raise ParseError(f"bad listen_address {self.listen_address!r}")
        return host, int(port)

    def violation_types(self) -> list[ViolationType]:
        return [
            ViolationType(type_id=t, factor_schema=tuple(schema))
            for t, schema in sorted(self.types.items())
        ]


def load_config(path) -> EngineConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad config file: {exc}") from exc
    known = {
        "mode",
        "update_period",
        "epsilon",
        "history_path",
        "checkpoint_path",
        "diagnostics_path",
        "listen_address",
        "types",
        "ui_dist",
    }
    unknown = set(obj) - known
    if unknown:
        raise ParseError(f"config has unknown fields: {sorted(unknown)}")
    if "types" in obj:
        obj["types"] = {k: tuple(v) for k, v in obj["types"].items()}
    return EngineConfig(**obj)


def _check_writable(path: Path) -> None:
    parent = path.parent if path.parent != Path("") else Path(".")
    if not parent.exists():
        raise ParseError(f"directory for {path} does not exist")


def replay_history_into_engine(config: EngineConfig, db) -> TriageEngine:
    """Rebuild learned state by re-running ingestion over stored records.

    Every recomputed prediction must match the stored one; a mismatch means
    the history was produced by different code or data and is unusable.
    """
    engine = TriageEngine(
        config.violation_types(), epsilon=config.epsilon, auto_register=True
    )
    for record in db:
        engine.ingest_tick(
            record.events,
            record.sa_priorities,
            resolved=record.resolved,
            tick=record.tick,
        )
        got = tick_record_to_json(engine.db.record(record.tick))
        want = tick_record_to_json(record)
        if got != want:
            raise InternalInvariantError(
                f"replay diverged from stored history at tick {record.tick}"
            )
    return engine


def build_engine(config: EngineConfig) -> TriageEngine:
    """Fresh engine, or state resumed from history plus checkpoint."""
    history_path = Path(config.history_path)
    _check_writable(history_path)
    _check_writable(Path(config.checkpoint_path))
    _check_writable(Path(config.diagnostics_path))

    if not history_path.exists() or history_path.stat().st_size == 0:
        return TriageEngine(
            config.violation_types(), epsilon=config.epsilon, auto_register=True
        )

    db = load_history(history_path)
    cp_path = Path(config.checkpoint_path)
    if cp_path.exists():
        payload = ckpt.load_checkpoint(cp_path)
        if payload["current_tick"] != db.current_tick:
            raise ParseError(
                f"checkpoint is at tick {payload['current_tick']} but history "
                f"ends at {db.current_tick}"
            )
        engine = ckpt.restore_engine(payload, auto_register=True)
        engine.db = db
        _rebuild_last_ranking(engine)
        logger.info("resumed from checkpoint at tick %d", db.current_tick)
        return engine

    logger.info("no checkpoint; replaying %d stored ticks", len(db))
    return replay_history_into_engine(config, db)


def _rebuild_last_ranking(engine: TriageEngine) -> None:
    """Recompute the last tick's post-update ranking from restored state."""
    from .engine import rank_events

    t = engine.db.current_tick
    if t < 0:
        return
    record = engine.db.record(t)
    ranking = rank_events(engine.registry, engine.db, t, record.events)
    engine.last_report = TickReport(
        tick=t, updated_types=(), newly_flagged=(), ranking=ranking
    )


@dataclass
class BatchReport:
    """What a batch run did, printable and machine-readable."""

    ticks_ingested: int
    final_tick: int
    flagged: int
    coefficient_snapshot: dict


def append_diagnostics(config: EngineConfig, report: TickReport) -> None:
    """One serialized tick report per line in the diagnostics log."""
    from .events import canonical_json

    with Path(config.diagnostics_path).open("a", encoding="utf-8") as fh:
        fh.write(canonical_json(report_to_obj(report)) + "\n")


def run_batch(
    config: EngineConfig, stream_path, out=print
) -> BatchReport:
    """Ingest a priced stream file end to end, persisting as it goes."""
    stream = load_priced_stream(stream_path)
    engine = build_engine(config)
    history_path = Path(config.history_path)

    ingested = 0
    with history_path.open("a", encoding="utf-8") as fh:
        for pt in stream:
            if pt.tick <= engine.db.current_tick:
                continue  # already committed on a previous run
            report = engine.ingest_tick(
                pt.events, pt.sa_priorities, resolved=pt.resolved, tick=pt.tick
            )
            fh.write(tick_record_to_json(engine.db.record(pt.tick)) + "\n")
            append_diagnostics(config, report)
            ingested += 1
            ranking = " ".join(
                f"{e.instance_id}({e.f_value:.3g})" for e in report.ranking.entries
            )
            out(f"tick {pt.tick}: {ranking}" if ranking else f"tick {pt.tick}: (empty)")
            if report.newly_flagged:
                out(f"tick {pt.tick}: flagged {', '.join(report.newly_flagged)}")

    ckpt.export_checkpoint(engine, config.checkpoint_path)
    snapshot = {
        t: [float(c) for c in engine.registry.coefficients_for(t)]
        for t in sorted(engine.registry.types)
    }
    report = BatchReport(
        ticks_ingested=ingested,
        final_tick=engine.db.current_tick,
        flagged=len(engine.flags.flagged_ids()),
        coefficient_snapshot=snapshot,
    )
    out(
        f"ingested {report.ticks_ingested} ticks (history at {report.final_tick}); "
        f"{report.flagged} flagged instances"
    )
    for type_id, coeffs in snapshot.items():
        out(f"  {type_id}: coefficients {coeffs}")
    return report


class EngineService:
    """Thread-safe wrapper: one exclusive ingest at a time, consistent reads."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.engine = build_engine(config)
        self._ingest_lock = threading.Lock()

    def submit_tick(self, payload: dict) -> TickReport:
        events, priorities, resolved, tick = _parse_tick_body(payload)
        if not self._ingest_lock.acquire(blocking=False):
            raise BusyError("a tick ingestion is already in progress")
        try:
            report = self.engine.ingest_tick(
                events, priorities, resolved=resolved, tick=tick
            )
            history_path = Path(self.config.history_path)
            with history_path.open("a", encoding="utf-8") as fh:
                fh.write(tick_record_to_json(self.engine.db.record(report.tick)) + "\n")
            append_diagnostics(self.config, report)
            return report
        finally:
            self._ingest_lock.release()

    def queue_rows(self) -> list[dict]:
        """Open events of the last tick, joined with ranking and flag state."""
        engine = self.engine
        if engine.last_report is None:
            return []
        open_ids = {e.instance_id for e in engine.open_events()}
        by_id = {e.instance_id: e for e in engine.open_events()}
        rows = []
        for entry in engine.last_report.ranking.entries:
            if entry.instance_id not in open_ids:
                continue
            event = by_id[entry.instance_id]
            rows.append(
                {
                    "instance_id": event.instance_id,
                    "type_id": event.type_id,
                    "first_reported": event.first_reported,
                    "factors": list(event.factors),
                    "f_value": entry.f_value,
                    "linear_term": entry.linear_term,
                    "delta": entry.delta,
                    "flagged": engine.flags.is_flagged(event.instance_id),
                }
            )
        return rows

    def model_summary(self, type_id: str) -> dict:
        vt = self.engine.registry.type_for(type_id)
        model = self.engine.registry.models.get(type_id)
        return {
            "type_id": type_id,
            "factor_schema": list(vt.factor_schema),
            "cold": model is None,
            "samples_absorbed": 0 if model is None else model.samples_absorbed,
            "n_components": 0 if model is None else model.n_components,
            "epsilon": self.engine.registry.epsilon,
            "coefficients": [
                float(c) for c in self.engine.registry.coefficients_for(type_id)
            ],
        }

    def export(self) -> dict:
        return ckpt.export_checkpoint(self.engine, self.config.checkpoint_path)

    def merge(self, theirs: dict) -> dict:
        """Adopt another site's models and flags under the merge rule."""
        if not self._ingest_lock.acquire(blocking=False):
            raise BusyError("a tick ingestion is already in progress")
        try:
            merged = ckpt.merge_checkpoints(ckpt.checkpoint_obj(self.engine), theirs)
            restored = ckpt.restore_engine(merged, auto_register=True)
            self.engine.registry = restored.registry
            self.engine.flags = restored.flags
            _rebuild_last_ranking(self.engine)
            return merged
        finally:
            self._ingest_lock.release()


def _parse_tick_body(payload: dict):
    if not isinstance(payload, dict):
        raise ParseError("tick body must be an object")
    try:
        events = tuple(
            EventInstance(
                instance_id=e["instance_id"],
                type_id=e["type_id"],
                first_reported=int(e["first_reported"]),
                factors=tuple(e["factors"]),
            )
            for e in payload["events"]
        )
        priorities = {k: int(v) for k, v in payload.get("sa_priorities", {}).items()}
        resolved = frozenset(payload.get("resolved", []))
        tick = payload.get("tick")
        tick = int(tick) if tick is not None else None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad tick body: {exc}") from exc
    return events, priorities, resolved, tick


def build_app(service: EngineService):
    """FastAPI application exposing the triage API over one engine service."""
    from fastapi import Body, FastAPI
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse

    app = FastAPI(title="triagelearn engine", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(InputError)
    async def input_error(_, exc: InputError):
        status = 404 if isinstance(exc, (MissingRecord, UnknownType)) else 400
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.exception_handler(BusyError)
    async def busy_error(_, exc: BusyError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.get("/events/current")
    def events_current():
        return service.queue_rows()

    @app.get("/rankings/current")
    def rankings_current():
        report = service.engine.last_report
        if report is None:
            return []
        return report_to_obj(report)["ranking"]

    @app.post("/ticks")
    def post_tick(payload: dict = Body(...)):
        return report_to_obj(service.submit_tick(payload))

    @app.get("/diagnostics/delta/{instance_id}")
    def diagnostics_delta(instance_id: str):
        return service.engine.delta_breakdown(instance_id)

    @app.get("/diagnostics/flags")
    def diagnostics_flags():
        engine = service.engine
        live = [e.instance_id for e in engine.open_events()]
        return engine.flags.snapshot(live)

    @app.get("/models/{type_id}")
    def model_info(type_id: str):
        return service.model_summary(type_id)

    @app.post("/checkpoints/export")
    def checkpoints_export():
        return service.export()

    @app.post("/checkpoints/merge")
    def checkpoints_merge(payload: dict = Body(...)):
        return service.merge(payload)

    if service.config.ui_dist:
        dist = Path(service.config.ui_dist)
        if dist.is_dir():
            from fastapi.staticfiles import StaticFiles

            app.mount("/", StaticFiles(directory=dist, html=True), name="ui")

    return app


def run_online(config: EngineConfig) -> None:
    """Serve the API until interrupted."""
    import uvicorn

    service = EngineService(config)
    host, port = config.host_port()
    app = build_app(service)
    uvicorn.run(app, host=host, port=port, log_level="info")
