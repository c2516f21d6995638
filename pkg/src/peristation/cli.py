"""Command-line front end.

Exit codes: 0 success, 1 validation failures or run faults, 2 parse and
usage errors.  Summaries go to stdout; machine-readable results go to
files (baselines CSV, telemetry CSV, sweep CSV).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional

from .config import (
    ConfigError,
    RunConfig,
    load_baselines,
    load_config,
    write_baselines,
)
from .control import CalibrationError, ControlFaultError, calibrate_baseline, run_station
from .geometry import sweep
from .hal import SimulatedBackend
from .plant import COMPRESSION, ObjectState, Plant
from .telemetry import TelemetryWriter


def parse_range(spec: str) -> list[float]:
    """Parse "start:stop:step" (stop inclusive) or a comma list of values."""
    spec = spec.strip()
    if not spec:
        raise ConfigError("empty range spec")
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range spec must be start:stop:step, got {spec!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"malformed range spec {spec!r}") from None
        if step <= 0:
            raise ConfigError(f"range step must be > 0, got {step}")
        if stop < start:
            raise ConfigError(f"range stop must be >= start, got {spec!r}")
        values = []
        k = 0
        while True:
            v = start + k * step
            if v > stop + 1e-9:
                return values
            values.append(v)
            k += 1
    try:
        return [float(p) for p in spec.split(",")]
    except ValueError:
        raise ConfigError(f"malformed range spec {spec!r}") from None


def _load(path: Optional[str]) -> Optional[RunConfig]:
    try:
        return load_config(path)
    except (ConfigError, OSError) as e:
        print(f"config error: {e}")
        return None


def _report_problems(cfg: RunConfig) -> bool:
    for p in cfg.problems:
        print(f"FAIL {p}")
    return bool(cfg.problems)


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    if _report_problems(cfg):
        return 1
    print("geometry: OK")
    print(f"station: OK ({len(cfg.layout.modules)} modules)")
    print("config: OK")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    if _report_problems(cfg):
        return 1
    if args.seed is not None:
        cfg.params = replace(cfg.params, rng_seed=args.seed)
    obj = None
    if cfg.calibration_with_object and cfg.object_spec is not None:
        obj = ObjectState(cfg.object_spec, cfg.initial_z)
    plant = Plant(cfg.layout, obj, cfg.params, cfg.material)
    backend = SimulatedBackend(plant)
    rates = {}
    for mod in cfg.layout.modules:
        if mod.kind != COMPRESSION:
            continue
        try:
            rates[mod.id] = calibrate_baseline(backend, mod.id, cfg.params, cfg.detection,
                                               cfg.control)
        except (CalibrationError, ControlFaultError) as e:
            print(f"calibration failed: {e}")
            return 1
        print(f"module {mod.id}: {rates[mod.id]:.6f} kPa/s")
    out = args.out or "baselines.csv"
    write_baselines(out, rates)
    print(f"baselines written to {out}")
    return 0


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    if args.duration is not None:
        cfg.duration_s = args.duration
        if cfg.duration_s <= 0:
            cfg.problems.append(f"run: duration_s must be > 0, got {cfg.duration_s}")
    if _report_problems(cfg):
        return 1
    if args.seed is not None:
        cfg.params = replace(cfg.params, rng_seed=args.seed)
    detection = cfg.detection
    if args.baselines:
        try:
            detection = replace(detection, baseline_rates=load_baselines(args.baselines))
        except (ConfigError, OSError) as e:
            print(f"config error: {e}")
            return 2
    obj = ObjectState(cfg.object_spec, cfg.initial_z) if cfg.object_spec else None
    plant = Plant(cfg.layout, obj, cfg.params, cfg.material)
    backend = SimulatedBackend(plant)
    out = args.out or cfg.output_path or "telemetry.csv"
    with TelemetryWriter(out) as recorder:
        result = run_station(backend, cfg.layout, cfg.object_spec, cfg.initial_z,
                             cfg.params, detection, cfg.control, cfg.duration_s,
                             recorder=recorder)
    drops = sum(1 for _, _, text in result.events if text.startswith("drop"))
    print(f"outcome: {result.outcome}")
    print(f"cycles: {result.cycles}")
    print(f"detections: {result.positive_detections}")
    print(f"probes: {len(result.detections)}")
    print(f"drops: {drops}")
    print(f"final z: {result.final_z:.6f} mm")
    print(f"faults: {len(result.faults)}")
    for text in result.faults:
        print(f"  fault: {text}")
    print(f"telemetry: {out}")
    return 1 if result.faults else 0


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    if _report_problems(cfg):
        return 1
    try:
        values = parse_range(args.range)
        if args.param == "N":
            for v in values:
                if v != int(v):
                    raise ConfigError(f"sweep over N requires integer values, got {v}")
            values = [int(v) for v in values]
        result = sweep(cfg.geometry, cfg.material, cfg.params.P_max, args.param, values)
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}")
        return 2

    def fmt(v) -> str:
        return str(v) if args.param == "N" else f"{v:.6f}"

    out = args.out or "sweep.csv"
    with open(out, "w", newline="") as f:
        f.write(f"{args.param},d_c_over_r\n")
        for v, d in result.samples:
            f.write(f"{fmt(v)},{'infeasible' if d is None else format(d, '.6f')}\n")
    best = result.argmax()
    if best is None:
        print("no feasible samples")
    else:
        print(f"argmax {args.param}={fmt(best[0])} d_c_over_r={best[1]:.6f}")
    print(f"sweep written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peristation",
        description="Simulate and analyze a stacked pneumatic transport station.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config against every design rule")
    p.add_argument("--config", metavar="PATH", help="YAML config (defaults apply if omitted)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("calibrate", help="measure no-object baseline rates")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--out", metavar="PATH", help="baselines CSV (default baselines.csv)")
    p.add_argument("--seed", type=int, metavar="INT", help="override sensor noise seed")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("run", help="run the closed-loop transport scenario")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--out", metavar="PATH", help="telemetry CSV (default telemetry.csv)")
    p.add_argument("--baselines", metavar="PATH", help="calibration CSV from `calibrate`")
    p.add_argument("--seed", type=int, metavar="INT", help="override sensor noise seed")
    p.add_argument("--duration", type=float, metavar="SECONDS", help="override run duration")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one geometry parameter and report d_c/r")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--param", required=True, choices=("N", "l", "t"))
    p.add_argument("--range", required=True, metavar="SPEC",
                   help="start:stop:step (stop inclusive) or v1,v2,...")
    p.add_argument("--out", metavar="PATH", help="sweep CSV (default sweep.csv)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
