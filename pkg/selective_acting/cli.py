"""
Command-line surface.

    run <config.yaml | preset> [--seeds ...] [--reps N] [--out DIR] [--threads K] [--store]
    list-presets
    emit <bundle.json> --format {summary-json,table-csv,trajectory-csv,all} [--out DIR]
    calibrate <calibration.jsonl> --out MODEL.json

Failures print a JSON error record on stderr and exit nonzero.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from selective_acting.exceptions import ConfigError, SelectiveActingError
from selective_acting.services.calibration import failure_pairs, fit_isotonic, save_model
from selective_acting.services.emitter import EmitFormat, emit, emit_all, load_bundle
from selective_acting.services.experiment_runner import load_config, run_experiment
from selective_acting.services.presets import available_presets, preset
from selective_acting.services.streams import read_replay
from selective_acting.settings import RESULTS_DIR, THREADS, configure_logging

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_USAGE = 2


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, {"usage": self.format_usage().strip()})


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="selective-acting", description="Anytime-valid selective acting experiments")
    parser.add_argument("--log-level", default=None, help="Override CSA_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an experiment from a YAML config or a preset name")
    run.add_argument("target", help="Path to a YAML config or a preset name")
    run.add_argument("--seeds", type=int, nargs="+", default=None, help="Explicit replication seeds")
    run.add_argument("--reps", type=int, default=None, help="Number of replications")
    run.add_argument("--out", type=Path, default=None, help="Output directory")
    run.add_argument("--threads", type=int, default=None, help="Worker processes")
    run.add_argument("--store", action="store_true", help="Also store the bundle in the database")

    sub.add_parser("list-presets", help="List built-in presets")

    emit_cmd = sub.add_parser("emit", help="Re-emit output files from a summary JSON bundle")
    emit_cmd.add_argument("bundle", type=Path)
    emit_cmd.add_argument("--format", dest="fmt", default="all",
                          choices=[f.value for f in EmitFormat] + ["all"])
    emit_cmd.add_argument("--out", type=Path, default=None)

    calibrate = sub.add_parser("calibrate", help="Fit an isotonic score model on a held-out replay file")
    calibrate.add_argument("replay", type=Path)
    calibrate.add_argument("--out", type=Path, required=True, help="Model file to write")
    return parser


def _resolve_config(target: str):
    path = Path(target)
    if path.suffix in (".yaml", ".yml") or path.exists():
        return load_config(path)
    return preset(target)


def cmd_run(args) -> int:
    config = _resolve_config(args.target)
    if args.reps is not None and args.reps < 1:
        raise ConfigError("--reps must be at least 1")
    threads = args.threads if args.threads is not None else (THREADS if THREADS > 1 else None)
    bundle = run_experiment(config, reps=args.reps, seeds=args.seeds, threads=threads)

    out_dir = args.out or Path(config.out_dir or RESULTS_DIR)
    paths = emit_all(bundle, out_dir)
    if args.store:
        from selective_acting.db.database import SessionLocal, init_db
        from selective_acting.services.result_store import ResultStore

        init_db()
        db = SessionLocal()
        try:
            ResultStore().save_bundle(db, bundle)
        finally:
            db.close()

    print(json.dumps({"success": True, "name": bundle.name, "files": [str(p) for p in paths]}))
    return 0


def cmd_list_presets(args) -> int:
    for name in available_presets():
        print(name)
    return 0


def cmd_emit(args) -> int:
    if not args.bundle.exists():
        raise ConfigError(f"bundle file not found: {args.bundle}", {"path": str(args.bundle)})
    bundle = load_bundle(args.bundle)
    out_dir = args.out or args.bundle.parent
    paths = emit_all(bundle, out_dir) if args.fmt == "all" else [emit(bundle, args.fmt, out_dir)]
    print(json.dumps({"success": True, "files": [str(p) for p in paths]}))
    return 0


def cmd_calibrate(args) -> int:
    if not args.replay.exists():
        raise ConfigError(f"replay file not found: {args.replay}", {"path": str(args.replay)})
    stream = read_replay(args.replay)
    model = fit_isotonic(failure_pairs(stream.rounds))
    save_model(model, args.out)
    print(json.dumps({"success": True, "knots": len(model.breakpoints), "files": [str(args.out)]}))
    return 0


COMMANDS = {
    "run": cmd_run,
    "list-presets": cmd_list_presets,
    "emit": cmd_emit,
    "calibrate": cmd_calibrate,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level)
        return COMMANDS[args.command](args)
    except SelectiveActingError as e:
        print(json.dumps(e.to_record()), file=sys.stderr)
        return EXIT_USAGE if isinstance(e, ConfigError) else EXIT_FAILURE
    except Exception as e:
        logger.exception("Unexpected failure")
        record = {"success": False, "error": {"type": type(e).__name__, "message": str(e), "details": {}}}
        print(json.dumps(record), file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
