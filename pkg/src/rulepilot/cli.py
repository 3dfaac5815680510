"""Command-line entry points.

Exit codes: 0 success, 2 validation error, 3 no solution or emergency stop,
4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import (
    coverage_result,
    evaluate_result,
    offline_result,
    online_result,
    track_compare_result,
)
from .errors import (
    InvalidArgumentError,
    NoSolutionError,
    SolverFailureError,
    ValidationError,
)
from .geometry import Footprint
from .scenario_io import (
    load_hierarchy,
    load_offline_config,
    load_online_config,
    load_scenario,
    save_result,
)

EXIT_VALIDATION = 2
EXIT_NO_SOLUTION = 3
EXIT_SOLVER_FAILURE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulepilot",
        description="Rule-hierarchy-aware trajectory synthesis and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, online=False):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--hierarchy", "--torq", dest="hierarchy", required=True,
                       help="rule hierarchy JSON file")
        p.add_argument("--config", default=None, help="controller config JSON file")
        p.add_argument("--out", required=True, help="result JSON output path")

    p = sub.add_parser("run-offline", help="full-information iterative relaxation run")
    common(p)

    p = sub.add_parser("run-online", help="local-sensing receding-horizon run")
    common(p, online=True)
    p.add_argument("--sensing-radius", type=float, default=None,
                   help="override the sensing radius in meters")

    p = sub.add_parser("evaluate", help="pass/fail judging of a candidate polyline")
    common(p)
    p.add_argument("--candidate", required=True,
                   help="candidate JSON: {points_m: [[x,y],...], target_speed_mps?}")

    p = sub.add_parser("coverage", help="optimal disk coverage for a footprint")
    p.add_argument("--footprint", required=True,
                   help="footprint JSON file ({length_m, width_m, ...})")
    p.add_argument("--clearances", required=True,
                   help='clearance bounds JSON: {"f": [lo, hi], "b": ..., "l": ..., "r": ...}')
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--zmax", type=int, default=10)

    p = sub.add_parser("track-compare",
                       help="stabilizing-row vs receding-horizon tracking comparison")
    p.add_argument("--scenario", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--scenario-dir", default=None,
                   help="directory of stored scenario JSON files")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ValidationError as exc:
        print(f"validation error at {exc.pointer}: {exc.detail}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InvalidArgumentError, json.JSONDecodeError, OSError, KeyError) as exc:
        print(f"invalid input: {exc!r}", file=sys.stderr)
        return EXIT_VALIDATION
    except NoSolutionError as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except SolverFailureError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE


def _dispatch(args) -> int:
    if args.command == "run-offline":
        payload = offline_result(load_scenario(args.scenario),
                                 load_hierarchy(args.hierarchy),
                                 load_offline_config(args.config))
        save_result(payload, args.out)
        print(f"relaxed rules: {payload['relaxed_rules']}  "
              f"totals: { {k: round(v, 4) for k, v in payload['totals'].items() if v} }")
        return 0

    if args.command == "run-online":
        config = load_online_config(args.config)
        if args.sensing_radius is not None:
            from dataclasses import replace
            config = replace(config, sensing_radius=args.sensing_radius)
        payload = online_result(load_scenario(args.scenario),
                                load_hierarchy(args.hierarchy), config)
        save_result(payload, args.out)
        print(f"totals: { {k: round(v, 4) for k, v in payload['totals'].items() if v} }  "
              f"emergencies: {payload['emergency_steps']}")
        return EXIT_NO_SOLUTION if payload["emergency_steps"] else 0

    if args.command == "evaluate":
        candidate = json.loads(Path(args.candidate).read_text())
        if "points_m" not in candidate:
            raise ValidationError("/points_m", "missing candidate polyline")
        payload = evaluate_result(load_scenario(args.scenario),
                                  load_hierarchy(args.hierarchy),
                                  load_offline_config(args.config),
                                  candidate["points_m"],
                                  candidate.get("target_speed_mps"))
        save_result(payload, args.out)
        print(f"verdict: {payload['verdict']}")
        return 0

    if args.command == "coverage":
        fp_data = json.loads(Path(args.footprint).read_text())
        footprint = Footprint(fp_data["length_m"], fp_data["width_m"],
                              fp_data["rear_to_cog_m"], fp_data["front_to_cog_m"])
        raw = json.loads(Path(args.clearances).read_text())
        bounds = {side: (float(raw[side][0]), float(raw[side][1])) for side in "fblr"}
        payload = coverage_result(footprint, bounds, args.beta, args.zmax)
        print(json.dumps(payload, indent=2))
        return 0

    if args.command == "track-compare":
        payload = track_compare_result(load_scenario(args.scenario),
                                       load_offline_config(args.config),
                                       load_online_config(None))
        save_result(payload, args.out)
        clf, mpc = payload["clf"]["stats"], payload["mpc"]["stats"]
        print(f"CLF max |d|: {clf['max_abs_lateral_m']:.3f} m, "
              f"mean v: {clf['mean_speed_mps']:.2f} m/s")
        print(f"MPC max |d|: {mpc['max_abs_lateral_m']:.3f} m, "
              f"mean v: {mpc['mean_speed_mps']:.2f} m/s")
        return 0

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        app = create_app(scenario_dir=args.scenario_dir)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        return 0

    raise InvalidArgumentError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
