"""Command-line entry point.

Subcommands:
  run       --mode batch --stream FILE --config FILE | --mode online --config FILE
  simulate  --spec FILE [--seed N] -o FILE
  checkpoint export|import|merge

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .checkpoint import load_checkpoint, merge_checkpoints
from .errors import InputError
from .events import canonical_json
from .service import EngineConfig, build_engine, load_config, run_batch, run_online
from .simulate import (
    default_oracle,
    generate_stream,
    load_stream_spec,
    price_stream,
    save_priced_stream,
)

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="engine", description="adaptive security-event prioritization engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="ingest a stream (batch) or serve the API (online)")
    run.add_argument("--mode", choices=["batch", "online"], required=True)
    run.add_argument("--config", help="JSON config file", default=None)
    run.add_argument("--stream", help="priced stream file (batch mode)", default=None)

    sim = sub.add_parser("simulate", help="generate a priced stream from a spec file")
    sim.add_argument("--spec", required=True, help="JSON stream spec file")
    sim.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    sim.add_argument("-o", "--output", required=True, help="stream file to write")

    cp = sub.add_parser("checkpoint", help="export, verify, or merge checkpoints")
    cp_sub = cp.add_subparsers(dest="cp_command", required=True)

    cp_export = cp_sub.add_parser("export", help="rebuild state from history and export")
    cp_export.add_argument("--config", required=True)
    cp_export.add_argument("-o", "--output", default=None, help="defaults to the config's checkpoint_path")

    cp_import = cp_sub.add_parser("import", help="verify a checkpoint and summarize it")
    cp_import.add_argument("path")

    cp_merge = cp_sub.add_parser("merge", help="merge two checkpoints into one")
    cp_merge.add_argument("ours")
    cp_merge.add_argument("theirs")
    cp_merge.add_argument("-o", "--output", required=True)

    return parser


def _config_from(args) -> EngineConfig:
    config = load_config(args.config) if args.config else EngineConfig()
    if getattr(args, "mode", None) and config.mode != args.mode:
        config = dataclasses.replace(config, mode=args.mode)
    return config


def _cmd_run(args) -> int:
    config = _config_from(args)
    if args.mode == "batch":
        if not args.stream:
            raise InputError("batch mode needs --stream FILE")
        run_batch(config, args.stream)
        return 0
    run_online(config)
    return 0


def _cmd_simulate(args) -> int:
    spec = load_stream_spec(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    stream = generate_stream(spec)
    priced = price_stream(stream, default_oracle(spec))
    save_priced_stream(priced, args.output)
    print(f"wrote {len(priced)} ticks to {args.output}")
    return 0


def _cmd_checkpoint(args) -> int:
    if args.cp_command == "export":
        from .checkpoint import export_checkpoint

        config = load_config(args.config)
        engine = build_engine(config)
        target = args.output or config.checkpoint_path
        export_checkpoint(engine, target)
        print(f"checkpoint at tick {engine.db.current_tick} written to {target}")
        return 0

    if args.cp_command == "import":
        payload = load_checkpoint(args.path)
        print(f"checkpoint verified: tick {payload['current_tick']}")
        for type_id, entry in sorted(payload["types"].items()):
            model = entry["model"]
            samples = model["samples_absorbed"] if model else 0
            print(f"  {type_id}: {samples} samples, schema {entry['factor_schema']}")
        print(f"  flags: {len(payload['flags'])}")
        return 0

    merged = merge_checkpoints(load_checkpoint(args.ours), load_checkpoint(args.theirs))
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(merged) + "\n")
    print(f"merged checkpoint written to {args.output}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_checkpoint(args)
    except (InputError, FileNotFoundError, json.JSONDecodeError) as exc:
        logger.error("%s", exc)
        return 1
    except KeyboardInterrupt:
        return 0
    except Exception as exc:  # invariant violations and genuine bugs
        logger.exception("internal error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
