"""Command-line frontend: curves, thresholds, simulation, attack demo.

Subcommands
-----------
curve        CSV/JSON of the Bell-value curves over the source angle.
rate-curve   CSV/JSON of the secure normalized rate versus depolarization.
thresholds   JSON of the efficiency thresholds and noise tolerances.
simulate     Run a Monte-Carlo session and emit its result as JSON.
attack-demo  CSV/JSON comparing clean and attacked Bell values.

Angles cross the CLI boundary in degrees and are converted to radians at the
edge. Every run writes a manifest next to its primary output listing all
emitted files with SHA-256 checksums, so figure data can be diffed and
pinned. Exit codes: 0 success, 2 configuration error, 3 a simulation ended
with too few conclusive events to estimate anything (its JSON is still
written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .bell import analytic_ch, analytic_ch_max, ch_value, table_from_state
from .channels import ChannelModel, analytic_pipeline_state
from .rates import efficiency_threshold, max_depolarization, optimal_theta, pm_reference_rate
from .session import SessionConfig, run_session
from .states import ProtocolAngle, ch_settings

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INSUFFICIENT = 3


@dataclass
class RunManifest:
    """Record of one CLI invocation: inputs and checksummed outputs."""

    subcommand: str
    parameters: dict
    seed: Optional[int]
    outputs: List[dict] = field(default_factory=list)

    def add_output(self, path: str) -> None:
        digest = hashlib.sha256()
        with open(path, "rb") as fh:
            digest.update(fh.read())
        self.outputs.append({"path": str(path), "sha256": digest.hexdigest()})

    def to_json_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "parameters": self.parameters,
            "seed": self.seed,
            "outputs": self.outputs,
        }

    def write(self, primary_output: str) -> str:
        path = f"{primary_output}.manifest.json"
        _write_json(path, self.to_json_dict())
        return path


def _write_json(path: str, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_csv(path: str, header: List[str], rows: List[List[float]]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(value: float) -> str:
    return "%.12g" % float(value)


def _emit_table(args, manifest: RunManifest, header: List[str], rows: List[List[float]]) -> int:
    if args.format == "csv":
        _write_csv(args.output, header, rows)
    else:
        _write_json(args.output, {"rows": [dict(zip(header, map(float, row))) for row in rows]})
    manifest.add_output(args.output)
    manifest.write(args.output)
    return EXIT_OK


def _theta_grid_degrees(args) -> np.ndarray:
    if args.points < 2:
        raise ValueError("need at least 2 grid points")
    if not 0.0 < args.theta_min_deg < args.theta_max_deg < 90.0:
        raise ValueError("degree grid must satisfy 0 < min < max < 90")
    return np.linspace(args.theta_min_deg, args.theta_max_deg, args.points)


def cmd_curve(args) -> int:
    """Bell value and best-achievable Bell value per source angle."""
    grid = _theta_grid_degrees(args)
    rows = []
    for deg in grid:
        theta = math.radians(deg)
        s = analytic_ch(theta)
        s_max, bob_angle = analytic_ch_max(theta)
        rows.append([deg, s, s_max, math.degrees(bob_angle)])
    manifest = RunManifest("curve", {
        "points": args.points,
        "theta_min_deg": args.theta_min_deg,
        "theta_max_deg": args.theta_max_deg,
        "format": args.format,
        "workers": args.workers,
    }, args.seed)
    return _emit_table(args, manifest, ["theta_deg", "s_ch", "s_ch_max", "bob_angle_deg"], rows)


def cmd_rate_curve(args) -> int:
    """Secure normalized rate at the optimal angle, versus depolarization."""
    if args.p_step <= 0 or args.p_max <= 0:
        raise ValueError("p-max and p-step must be positive")
    n_steps = int(round(args.p_max / args.p_step))
    if abs(n_steps * args.p_step - args.p_max) > 1e-12:
        raise ValueError("p-max must be an integer multiple of p-step")
    grid = np.arange(n_steps + 1) * args.p_step
    rows = []
    for p in grid:
        theta_star, report = optimal_theta(float(p))
        rows.append([float(p), report.normalized_rate, math.degrees(theta_star), pm_reference_rate(float(p))])
    manifest = RunManifest("rate-curve", {
        "p_max": args.p_max,
        "p_step": args.p_step,
        "format": args.format,
        "workers": args.workers,
    }, args.seed)
    return _emit_table(args, manifest,
                       ["p", "normalized_rate", "theta_star_deg", "pm_reference"], rows)


def cmd_thresholds(args) -> int:
    """All headline thresholds in one JSON document."""
    payload = {
        "efficiency": {
            mode: efficiency_threshold(mode).to_json_dict()
            for mode in ("symmetric", "alice_perfect", "bob_perfect")
        },
        "max_depolarization": {
            strategy: max_depolarization(strategy).to_json_dict()
            for strategy in ("fixed_settings", "ch_max")
        },
    }
    _write_json(args.output, payload)
    manifest = RunManifest("thresholds", {"workers": args.workers}, args.seed)
    manifest.add_output(args.output)
    manifest.write(args.output)
    return EXIT_OK


_SIMULATE_DEFAULTS = {
    "theta_deg": None,
    "rounds": None,
    "test_fraction": 0.25,
    "eta_a": 1.0,
    "eta_b": 1.0,
    "depol": 0.0,
    "attack": "none",
    "abort_threshold": 0.0,
    "chunk_size": 65536,
    "seed": 0,
}


def _merge_simulate_params(args) -> dict:
    # precedence: flag > config file > default
    merged = dict(_SIMULATE_DEFAULTS)
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_params = json.load(fh)
        unknown = set(file_params) - set(merged)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_params)
    for key in merged:
        flag_value = getattr(args, key)
        if flag_value is not None:
            merged[key] = flag_value
    if merged["theta_deg"] is None:
        raise ValueError("theta-deg is required (flag or config file)")
    if merged["rounds"] is None:
        raise ValueError("rounds is required (flag or config file)")
    return merged


def cmd_simulate(args) -> int:
    """Run one seeded session and write its result JSON."""
    params = _merge_simulate_params(args)
    config = SessionConfig(
        angle=ProtocolAngle.from_degrees(float(params["theta_deg"])),
        n_rounds=int(params["rounds"]),
        test_fraction=float(params["test_fraction"]),
        channel=ChannelModel(
            eta_a=float(params["eta_a"]),
            eta_b=float(params["eta_b"]),
            depol_p=float(params["depol"]),
            attacker=str(params["attack"]),
        ),
        seed=int(params["seed"]),
        abort_threshold=float(params["abort_threshold"]),
        chunk_size=int(params["chunk_size"]),
    )
    result = run_session(config, workers=args.workers)
    _write_json(args.output, result.to_json_dict())
    manifest = RunManifest("simulate", {**params, "workers": args.workers}, config.seed)
    manifest.add_output(args.output)
    if args.table_csv is not None:
        rows = []
        for i in (0, 1):
            for j in (0, 1):
                grid = result.table.pair(i, j)
                for a in range(3):
                    for b in range(3):
                        rows.append([i, j, a, b, int(grid[a, b])])
        _write_csv(args.table_csv,
                   ["alice_setting", "bob_setting", "alice_outcome", "bob_outcome", "count"], rows)
        manifest.add_output(args.table_csv)
    manifest.write(args.output)
    return EXIT_INSUFFICIENT if result.insufficient_statistics else EXIT_OK


def cmd_attack_demo(args) -> int:
    """Clean versus attacked Bell value across the angle range."""
    grid = _theta_grid_degrees(args)
    attacked_channel = ChannelModel(attacker="usd")
    ideal = ChannelModel()
    rows = []
    for deg in grid:
        angle = ProtocolAngle.from_degrees(float(deg))
        clean = analytic_ch(angle.theta)
        state = analytic_pipeline_state(angle, attacked_channel)
        attacked = ch_value(table_from_state(state, ch_settings(angle), ideal)).value
        rows.append([float(deg), clean, attacked])
    manifest = RunManifest("attack-demo", {
        "points": args.points,
        "theta_min_deg": args.theta_min_deg,
        "theta_max_deg": args.theta_max_deg,
        "format": args.format,
        "workers": args.workers,
    }, args.seed)
    return _emit_table(args, manifest, ["theta_deg", "s_ch_clean", "s_ch_attacked"], rows)


def _add_common(sp, default_output: str, formats=("csv", "json"), default_format="csv") -> None:
    sp.add_argument("--output", default=default_output, help="primary output path")
    sp.add_argument("--seed", type=int, default=None, help="random seed (simulation only)")
    sp.add_argument("--workers", type=int, default=1, help="worker threads; never changes results")
    sp.add_argument("--format", choices=list(formats), default=default_format)


def _add_theta_grid(sp) -> None:
    sp.add_argument("--points", type=int, default=89)
    sp.add_argument("--theta-min-deg", type=float, default=1.0)
    sp.add_argument("--theta-max-deg", type=float, default=89.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entb92",
        description="Entanglement-based B92: Bell curves, secure rates, and session simulation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("curve", help="Bell-value curves over the source angle")
    _add_common(sp, "curve.csv")
    _add_theta_grid(sp)
    sp.set_defaults(func=cmd_curve)

    sp = sub.add_parser("rate-curve", help="secure normalized rate versus depolarization")
    _add_common(sp, "rate_curve.csv")
    sp.add_argument("--p-max", type=float, default=0.04)
    sp.add_argument("--p-step", type=float, default=0.0005)
    sp.set_defaults(func=cmd_rate_curve)

    sp = sub.add_parser("thresholds", help="efficiency thresholds and noise tolerances")
    _add_common(sp, "thresholds.json", formats=("json",), default_format="json")
    sp.set_defaults(func=cmd_thresholds)

    sp = sub.add_parser("simulate", help="run one Monte-Carlo session")
    _add_common(sp, "session.json", formats=("json",), default_format="json")
    sp.add_argument("--config", default=None, help="JSON file with flag values; flags override")
    sp.add_argument("--theta-deg", type=float, default=None)
    sp.add_argument("--rounds", type=int, default=None)
    sp.add_argument("--test-fraction", type=float, default=None)
    sp.add_argument("--eta-a", type=float, default=None)
    sp.add_argument("--eta-b", type=float, default=None)
    sp.add_argument("--depol", type=float, default=None)
    sp.add_argument("--attack", choices=("none", "usd"), default=None)
    sp.add_argument("--abort-threshold", type=float, default=None)
    sp.add_argument("--chunk-size", type=int, default=None)
    sp.add_argument("--table-csv", default=None, help="also write the count table as CSV")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("attack-demo", help="clean versus attacked Bell value")
    _add_common(sp, "attack_demo.csv")
    _add_theta_grid(sp)
    sp.set_defaults(func=cmd_attack_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        parser.exit(EXIT_CONFIG, f"{parser.prog}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
