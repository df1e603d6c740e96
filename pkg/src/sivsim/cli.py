"""Command-line front end: `sivsim <experiment> [options]` and `sivsim report`."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib  # type: ignore[no-redef]

from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, ReportError, \
    emit_report, run_experiment


def _parse_set(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got '{item}'")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _flatten(prefix: str, node, out: dict) -> None:
    if isinstance(node, dict):
        for key, value in node.items():
            _flatten(f"{prefix}.{key}" if prefix else key, value, out)
    else:
        out[prefix] = node


def _load_config_file(path: str) -> dict:
    text = Path(path).read_bytes()
    try:
        data = tomllib.loads(text.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    flat: dict = {}
    _flatten("", data, flat)
    return flat


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sivsim",
        description="Run single-photon-source experiments from the catalog "
                    "and summarize their manifests.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    for name in sorted(EXPERIMENTS):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="TOML config file with dotted key sections")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for stochastic experiments")

    report = sub.add_parser("report", help="summarize experiment manifests")
    report.add_argument("manifests", nargs="+", help="manifest JSON files")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "report":
        try:
            sys.stdout.write(emit_report(args.manifests))
        except (ReportError, ConfigError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0

    overrides = {}
    try:
        if args.config:
            overrides.update(_load_config_file(args.config))
        for item in args.set:
            key, value = _parse_set(item)
            overrides[key] = value
        config = ExperimentConfig(name=args.command, overrides=overrides,
                                  seed=args.seed, out_dir=args.out)
        manifest = run_experiment(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(f"{args.command}: wrote {len(manifest.outputs)} file(s) to {args.out} "
          f"in {manifest.duration_s:.2f} s")
    for key, value in sorted(manifest.metrics.items()):
        if isinstance(value, float):
            print(f"  {key} = {value:.6g}")
        else:
            print(f"  {key} = {value}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
