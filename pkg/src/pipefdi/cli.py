"""Command-line front end: ``python -m pipefdi run|replay|calibrate``."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys

from .config import SCHEMA, ScenarioConfig, default_config
from .errors import PipeFDIError
from .runner import (EXIT_OK, calibrate_telemetry, default_out_dir, run_many, run_replay,
                     run_scenario)

# usage or input problems, distinct from the verdict exit codes 0-4
EXIT_USAGE = 64


def _overrides(args) -> dict:
    return {"seed": args.seed, "horizon": args.horizon, "lambda_leak": args.lambda_leak,
            "lambda_flow": args.lambda_flow, "lambda_pressure": args.lambda_pressure}


def _add_overrides(p):
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--horizon", type=float, help="simulated horizon [s]")
    p.add_argument("--lambda-leak", type=float, help="leak observer gain")
    p.add_argument("--lambda-flow", type=float, help="flow-offset observer gain")
    p.add_argument("--lambda-pressure", type=float, help="pressure-fault observer gain")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pipefdi", description=__doc__)
    ap.add_argument("--print-default-config", action="store_true",
                    help="print the reference scenario (leak at valve V4) and exit")
    ap.add_argument("--print-schema", action="store_true", help="print the config JSON schema")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command")

    r = sub.add_parser("run", help="simulate and diagnose a scenario (or a directory of them)")
    r.add_argument("config", help="scenario JSON file, or a directory of *.json files")
    r.add_argument("--out-dir", help="output directory (default $PIPEFDI_OUT_DIR or ./pipefdi-out)")
    r.add_argument("--jobs", type=int, help="parallel workers in directory mode")
    _add_overrides(r)

    rp = sub.add_parser("replay", help="diagnose a recorded telemetry file")
    rp.add_argument("telemetry")
    rp.add_argument("--config", required=True, help="scenario JSON supplying pipeline and policy")
    rp.add_argument("--out-dir")
    rp.add_argument("--no-reconstruct", action="store_true", help="skip observer dispatch")
    rp.add_argument("--score", action="store_true",
                    help="grade against the config's faults (exit code reflects the verdict)")
    _add_overrides(rp)

    c = sub.add_parser("calibrate", help="thresholds from a fault-free telemetry file")
    c.add_argument("telemetry")
    c.add_argument("--config", help="scenario JSON (default: reference pipeline)")
    c.add_argument("--window", type=float, help="calibration window [s]")
    return ap


def _summary(report: dict) -> str:
    v = report["verdict"]
    line = f"{report['name']}: {v['final']}"
    if v["detection_time"] is not None:
        line += f" (detected {v['detection_time']:.2f} s"
        if v["isolation_time"] is not None:
            line += f", isolated {v['isolation_time']:.2f} s"
        line += ")"
    rec = report.get("reconstruction")
    if rec and rec.get("final"):
        est = ", ".join(f"{k}={val:.6g}" for k, val in rec["final"].items())
        line += f"; {rec['observer']}: {est}"
    code = report["outcome"]["code"]
    if code is not None:
        line += f" -> {report['outcome']['label']}"
    return line


def _load(path, args) -> ScenarioConfig:
    return ScenarioConfig.load(path).with_overrides(**_overrides(args))


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_default_config:
        print(json.dumps(default_config(), indent=2))
        return EXIT_OK
    if args.print_schema:
        print(json.dumps(SCHEMA, indent=2))
        return EXIT_OK
    if args.command is None:
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "run":
            out = args.out_dir or default_out_dir()
            if os.path.isdir(args.config):
                paths = sorted(glob.glob(os.path.join(args.config, "*.json")))
                if not paths:
                    raise PipeFDIError(f"{args.config}: no *.json configs")
                items = [(os.path.splitext(os.path.basename(p))[0], _load(p, args))
                         for p in paths]
                reports = run_many(items, out, args.jobs)
                for rep in reports:
                    print(_summary(rep))
                return max(rep["outcome"]["code"] for rep in reports)
            rep = run_scenario(_load(args.config, args), out)
            print(_summary(rep.data))
            return rep.exit_code
        if args.command == "replay":
            cfg = _load(args.config, args)
            rep = run_replay(args.telemetry, cfg, args.out_dir or default_out_dir(),
                             reconstruct=False if args.no_reconstruct else None,
                             score=args.score)
            print(_summary(rep.data))
            return rep.exit_code if args.score else EXIT_OK
        if args.command == "calibrate":
            cfg = (ScenarioConfig.load(args.config) if args.config
                   else ScenarioConfig.from_dict(default_config(False)))
            print(json.dumps(calibrate_telemetry(args.telemetry, cfg, args.window), indent=2))
            return EXIT_OK
    except (PipeFDIError, OSError) as exc:
        print(f"pipefdi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
