"""Command-line entry points: batch scenario runs, the long-running service,
and run-directory export."""

import argparse
import json
import shutil
import sys
from pathlib import Path

from .errors import DriftlearnError, ExportError, ScenarioError
from .metrics import report_csv, report_table


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlearn",
        description="Continual-learning engine for streaming regression")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replay a scenario to completion")
    run.add_argument("scenario", help="scenario file (YAML)")
    run.add_argument("--out", required=True, help="output directory for the run")
    policy = run.add_mutually_exclusive_group()
    policy.add_argument("--auto", action="store_true",
                        help="force the auto policy on (default: scenario setting)")
    policy.add_argument("--manual", action="store_true",
                        help="force the auto policy off; updates stay pending")

    serve = sub.add_parser("serve", help="serve the operator API")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--scenario", required=True, help="scenario file to feed")
    serve.add_argument("--manual", action="store_true",
                       help="disable the auto policy; decisions come from operators")
    serve.add_argument("--pace", type=float, default=0.0,
                       help="ingest rate in samples/second (0 = full speed)")
    serve.add_argument("--dashboard", default="frontend/dist",
                       help="static dashboard directory to mount at /ui")

    export = sub.add_parser("export", help="archive a completed run directory")
    export.add_argument("run_dir")
    export.add_argument("--out", help="archive path (default: <run_dir>.zip)")
    return parser


def _write_outputs(out_dir: Path, engine, scenario_path: Path) -> None:
    from . import persist

    report = engine.eval_report()
    (out_dir / "report.txt").write_text(report_table(report) + "\n")
    (out_dir / "report.csv").write_text(report_csv(report))
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
    versions_dir = out_dir / "versions"
    for version in engine.version_store:
        persist.write_version_dir(versions_dir, version)
    shutil.copy(scenario_path, out_dir / f"scenario{scenario_path.suffix or '.yaml'}")


def cmd_run(args) -> int:
    from . import persist
    from .streams import build_engine, load_scenario, replay

    scenario_path = Path(args.scenario)
    try:
        script = load_scenario(scenario_path)
    except ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with persist.RunLogWriter(out_dir / "run_log.ndjson") as log:
        engine, stream = build_engine(script, log_sink=log)
        if args.auto:
            engine.auto_policy.enabled = True
        elif args.manual:
            engine.auto_policy.enabled = False
        try:
            replay(script, engine, stream)
        except ScenarioError as err:
            print(f"scenario failed: {err}", file=sys.stderr)
            _write_outputs(out_dir, engine, scenario_path)
            return 1
        engine.checkpoint("final")
        _write_outputs(out_dir, engine, scenario_path)
    print(report_table(engine.eval_report()))
    print(f"\nrun written to {out_dir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ScenarioFeeder, create_app
    from .streams import build_engine, load_scenario

    try:
        script = load_scenario(Path(args.scenario))
    except ScenarioError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    engine, stream = build_engine(script)
    if args.manual:
        engine.auto_policy.enabled = False
    dashboard = args.dashboard if Path(args.dashboard).is_dir() else None
    app = create_app(engine, dashboard_dir=dashboard)
    feeder = ScenarioFeeder(app, script, stream, pace=args.pace)
    feeder.start()
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_export(args) -> int:
    from .persist import export_run

    try:
        archive = export_run(args.run_dir, args.out)
    except (ExportError, DriftlearnError) as err:
        print(f"export failed: {err}", file=sys.stderr)
        return 1
    print(f"archive written to {archive}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "serve": cmd_serve, "export": cmd_export}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
