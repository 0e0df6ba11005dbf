"""Digest-verified checkpoints of engine state: models, flags, tick marker.

A checkpoint is a single self-describing JSON record. Floats are rendered
with full round-trip precision so import reproduces every model bit for bit,
and a SHA-256 digest over the canonical serialization is verified on load.

Merging two checkpoints keeps, per violation type, whichever model absorbed
more samples (ties keep ours) and unions the mismatch flags: a mismatch seen
at either site stands.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import pls
from .engine import TriageEngine, merge_models
from .errors import CorruptCheckpoint, ParseError, SchemaMismatch
from .events import ViolationType, canonical_json

FORMAT_NAME = "triage-checkpoint"
FORMAT_VERSION = 1


def model_to_obj(model: pls.PLSModel) -> dict:
    return {
        "n_factors": model.n_factors,
        "n_responses": model.n_responses,
        "epsilon": model.epsilon,
        "samples_absorbed": model.samples_absorbed,
        "components": [
            {
                "w": list(c.w),
                "p": list(c.p),
                "b": c.b,
                "q": list(c.q),
            }
            for c in model.components
        ],
    }


def model_from_obj(obj: dict) -> pls.PLSModel:
    try:
        components = tuple(
            pls.PLSComponent(
                w=c["w"],
                p=c["p"],
                b=float(c["b"]),
                q=c["q"],
            )
            for c in obj["components"]
        )
        return pls.PLSModel(
            n_factors=int(obj["n_factors"]),
            n_responses=int(obj["n_responses"]),
            components=components,
            epsilon=float(obj["epsilon"]),
            samples_absorbed=int(obj["samples_absorbed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad model record: {exc}") from exc


def _digest(payload: dict) -> str:
    body = {k: v for k, v in payload.items() if k != "digest"}
    return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()


def checkpoint_obj(engine: TriageEngine) -> dict:
    """Serializable snapshot of everything the engine has learned."""
    types = {}
    for type_id, vt in sorted(engine.registry.types.items()):
        model = engine.registry.models.get(type_id)
        types[type_id] = {
            "factor_schema": list(vt.factor_schema),
            "model": model_to_obj(model) if model is not None else None,
        }
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "current_tick": engine.db.current_tick,
        "epsilon": engine.registry.epsilon,
        "types": types,
        "flags": sorted(engine.flags.flagged_ids()),
    }
    payload["digest"] = _digest(payload)
    return payload


def export_checkpoint(engine: TriageEngine, path=None) -> dict:
    """Snapshot the engine; optionally write the record to a file."""
    payload = checkpoint_obj(engine)
    if path is not None:
        Path(path).write_text(canonical_json(payload) + "\n", encoding="utf-8")
    return payload


def verify_checkpoint(payload: dict) -> dict:
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise ParseError("not a checkpoint record")
    if payload.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported checkpoint version {payload.get('version')!r}")
    if "digest" not in payload or payload["digest"] != _digest(payload):
        raise CorruptCheckpoint("checkpoint digest does not verify")
    return payload


def load_checkpoint(path) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad checkpoint file: {exc}") from exc
    return verify_checkpoint(payload)


def restore_engine(payload: dict, auto_register: bool = False) -> TriageEngine:
    """Rebuild an engine's learned state from a verified checkpoint.

    The history database is restored separately; callers should check the
    tick marker against it.
    """
    verify_checkpoint(payload)
    engine = TriageEngine(
        epsilon=float(payload["epsilon"]), auto_register=auto_register
    )
    for type_id, entry in sorted(payload["types"].items()):
        engine.registry.register_type(
            ViolationType(type_id=type_id, factor_schema=tuple(entry["factor_schema"]))
        )
        if entry["model"] is not None:
            model = model_from_obj(entry["model"])
            if model.n_factors != len(entry["factor_schema"]):
                raise ParseError(
                    f"model for {type_id!r} disagrees with its factor schema"
                )
            engine.registry.models[type_id] = model
    for instance_id in payload["flags"]:
        engine.flags.flag(instance_id)
    return engine


def merge_checkpoints(ours: dict, theirs: dict) -> dict:
    """Combine two sites' checkpoints; the result carries a fresh digest.

    Shared types keep the model with more absorbed samples; disjoint types
    are unioned. Tick marker and tolerance come from ours.
    """
    verify_checkpoint(ours)
    verify_checkpoint(theirs)
    types: dict[str, dict] = {}
    for type_id in sorted(set(ours["types"]) | set(theirs["types"])):
        a = ours["types"].get(type_id)
        b = theirs["types"].get(type_id)
        if a is None or b is None:
            types[type_id] = json.loads(canonical_json(a if a is not None else b))
            continue
        if a["factor_schema"] != b["factor_schema"]:
            raise SchemaMismatch(
                f"factor schemas for {type_id!r} differ between checkpoints"
            )
        if a["model"] is None or b["model"] is None:
            chosen = a if a["model"] is not None else b
        else:
            ours_model = model_from_obj(a["model"])
            theirs_model = model_from_obj(b["model"])
            kept = merge_models(ours_model, theirs_model)
            chosen = b if kept is theirs_model else a
        types[type_id] = json.loads(canonical_json(chosen))
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "current_tick": ours["current_tick"],
        "epsilon": ours["epsilon"],
        "types": types,
        "flags": sorted(set(ours["flags"]) | set(theirs["flags"])),
    }
    payload["digest"] = _digest(payload)
    return payload
