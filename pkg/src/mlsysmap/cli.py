"""Command-line entry points.

Exit codes: 0 success, 1 domain error (invalid map, unknown alert, ...),
2 I/O or usage error. All stochastic commands take an explicit --seed and
default to 0; nothing reads wall-clock entropy.
"""

from __future__ import annotations

import argparse
import sys

from . import report as report_mod
from .dataset import load_csv
from .errors import MsmError
from .msmformat import parse_map
from .simulator import ScenarioConfig, generate
from .traversal import TraceConfig, detect_alerts, trace


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    try:
        parse_map(_read(args.map))
    except MsmError as exc:
        print(f"{args.map}: {exc}", file=sys.stderr)
        return 1
    print(f"{args.map}: ok")
    return 0


def cmd_detect(args) -> int:
    system_map = parse_map(_read(args.map))
    ds = load_csv(system_map, _read(args.data))
    alerts = detect_alerts(system_map, ds, alpha=args.alpha,
                           B=args.permutations, seed=args.seed)
    doc = report_mod.detect_document(system_map.name, alerts, args.alpha,
                                     args.permutations, args.seed)
    if args.format == "json":
        _emit(report_mod.render_json(doc), args.out)
    else:
        _emit(report_mod.render_text(doc), args.out)
    return 0


def cmd_trace(args) -> int:
    system_map = parse_map(_read(args.map))
    ds = load_csv(system_map, _read(args.data))
    config = TraceConfig(
        bins=args.bins,
        tau=args.tau,
        epsilon=args.epsilon,
        permutations=args.permutations,
        seed=args.seed,
        mode=args.mode,
        eager_environment=args.eager_environment,
    )
    result = trace(system_map, ds, args.alert, config)
    from .mechanisms import shift_test
    # stream offset keeps this independent of the per-node detect streams
    alert_test = shift_test(ds, system_map, args.alert,
                            B=config.test_permutations, seed=[args.seed, 10_000])
    doc = report_mod.trace_document(system_map.name, result, config, alert_test)
    if args.format == "json":
        _emit(report_mod.render_json(doc), args.out)
    else:
        _emit(report_mod.render_text(doc), args.out)
    return 0


def cmd_simulate(args) -> int:
    config = ScenarioConfig(scenario=args.scenario, n=args.n, seed=args.seed)
    out = generate(config)
    with open(args.out_data, "w", encoding="utf-8", newline="") as fh:
        fh.write(out.csv_text)
    with open(args.out_map, "w", encoding="utf-8", newline="") as fh:
        fh.write(out.map_text)
    print(f"wrote {args.out_data} and {args.out_map}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msm",
        description="Layered causal maps for tracing ML distribution shifts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a map file")
    p.add_argument("map")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("detect", help="run shift tests on system variables")
    p.add_argument("map")
    p.add_argument("data")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--permutations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("trace", help="trace an alert from symptom to source")
    p.add_argument("map")
    p.add_argument("data")
    p.add_argument("--alert", required=True)
    p.add_argument("--bins", type=int, default=8)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=TraceConfig().epsilon)
    p.add_argument("--mode", choices=("auto", "exact", "sampled"), default="auto")
    p.add_argument("--permutations", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eager-environment", action="store_true")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("simulate", help="generate a churn-example scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-data", required=True)
    p.add_argument("--out-map", required=True)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MsmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
