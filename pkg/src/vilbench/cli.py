"""Command line: run scenarios, report on and replay run logs, serve the cockpit.

Exit codes: 0 success, 2 scenario diverged, 3 protocol violation, 4 config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import (ConfigError, DivergenceFound, MalformedMap, PeerUnreachable,
                     ProtocolViolation)
from .harness import replay_run, run_scenario
from .runlog import RunLog, report
from .scenario import Stage, StageConfig, load_scenario

EXIT_OK = 0
EXIT_DIVERGED = 2
EXIT_PROTOCOL = 3
EXIT_CONFIG = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vilbench",
                                     description="virtual vehicle-in-the-loop test harness")
    sub = parser.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="execute a scenario")
    run.add_argument("--stage", choices=["internal", "external", "vil"], default="internal")
    run.add_argument("--scenario", required=True,
                     help="bundled name (acc_lka, emergency_brake, manual_drive) or JSON file")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None, help="directory for ticks.csv + run.json")
    run.add_argument("--camera-fps", type=float, default=None)
    run.add_argument("--tick-ms", type=float, default=None)
    group = run.add_mutually_exclusive_group()
    group.add_argument("--lockstep", dest="lockstep", action="store_true", default=True)
    group.add_argument("--free-running", dest="lockstep", action="store_false")
    run.add_argument("--kill-primary-at", type=float, default=None, metavar="SECS")
    run.add_argument("--kill-secondary-at", type=float, default=None, metavar="SECS")
    run.add_argument("--transport-delay-ms", type=float, default=0.0, metavar="D")

    rep = sub.add_parser("report", help="summarize a recorded run")
    rep.add_argument("run_dir")
    rep.add_argument("--settle", type=float, default=0.0,
                     help="seconds to exclude from error statistics")
    rep.add_argument("--json", action="store_true", dest="as_json")

    rpl = sub.add_parser("replay", help="re-run an internal-stage log and diff it")
    rpl.add_argument("run_dir")

    cockpit = sub.add_parser("serve-cockpit", help="drive a live scenario from the browser")
    cockpit.add_argument("--port", type=int, required=True)
    cockpit.add_argument("--scenario", default="manual_drive")
    cockpit.add_argument("--seed", type=int, default=None)
    cockpit.add_argument("--duration", type=float, default=None)
    cockpit.add_argument("--out", default=None)
    return parser


def _cmd_run(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    scenario = load_scenario(args.scenario, **overrides)
    if args.camera_fps is not None:
        scenario = dataclasses.replace(
            scenario, camera=dataclasses.replace(scenario.camera, fps=args.camera_fps))
    if args.tick_ms is not None:
        scenario = dataclasses.replace(scenario, tick_period=args.tick_ms / 1000.0)
    stage = StageConfig(
        stage=Stage(args.stage),
        lockstep=args.lockstep,
        injected_transport_delay=args.transport_delay_ms / 1000.0,
        kill_primary_at=args.kill_primary_at,
        kill_secondary_at=args.kill_secondary_at,
    )
    log = run_scenario(scenario, stage)
    if args.out:
        log.save(args.out)
        print(f"run log written to {args.out}")
    print(report(log).to_text())
    if log.terminated:
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_report(args) -> int:
    log = RunLog.load(args.run_dir)
    rep = report(log, settle_window=args.settle)
    if args.as_json:
        print(json.dumps(rep.to_json(), indent=2))
    else:
        print(rep.to_text())
    return EXIT_OK


def _cmd_replay(args) -> int:
    try:
        rows = replay_run(args.run_dir)
    except DivergenceFound as exc:
        print(f"DIVERGENCE at tick {exc.tick}:")
        print(f"  expected: {exc.expected}")
        print(f"  recorded: {exc.actual}")
        return EXIT_DIVERGED
    print(f"replay matched: {rows} rows byte-identical")
    return EXIT_OK


def _cmd_serve_cockpit(args) -> int:
    from .cockpit import CockpitChannel
    from .harness import resolve_map

    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.duration is not None:
        overrides["duration"] = args.duration
    scenario = load_scenario(args.scenario, **overrides)
    stage = StageConfig(stage=Stage.INTERNAL, realtime=True, cockpit_port=args.port)
    channel = CockpitChannel(args.port)
    _, path = resolve_map(scenario.map_name)
    channel.set_map(path, scenario.map_name)
    channel.start()
    print(f"cockpit channel on ws://127.0.0.1:{args.port}{'/cockpit'} "
          f"({scenario.name}, {scenario.duration:.0f} s)")
    try:
        log = run_scenario(scenario, stage, cockpit=channel)
    finally:
        channel.stop()
    if args.out:
        log.save(args.out)
        print(f"run log written to {args.out}")
    return EXIT_DIVERGED if log.terminated else EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            return _cmd_run(args)
        if args.cmd == "report":
            return _cmd_report(args)
        if args.cmd == "replay":
            return _cmd_replay(args)
        if args.cmd == "serve-cockpit":
            return _cmd_serve_cockpit(args)
        raise AssertionError(args.cmd)
    except (ConfigError, MalformedMap, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProtocolViolation, PeerUnreachable) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
