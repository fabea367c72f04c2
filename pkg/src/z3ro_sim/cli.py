"""Command-line entry point: ``z3ro-sim {scan,sweep,pattern}``.

Every successful run writes its result tables plus ``manifest.json`` into
``--out``. Failures print one ``z3ro-sim: error: <kind>: <message>`` line to
stderr and exit non-zero (2 for usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .config import (
    config_to_dict,
    is_synthetic,
    load_config,
    parse_grid,
    resolve_channel,
    resolve_channel_path,
)
from .errors import SimulationError, ValidationError
from .experiments import (
    ScenarioConfig,
    angular_pattern,
    backoff_sweep,
    ecdf,
    noise_for_snr_db,
    noise_sweep,
    reduction_statistics,
    single_user_scan,
    two_user_scan,
)
from .pa import Polynomial3
from .precoding import Selection

PROG = "z3ro-sim"


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v) -> str:
    return f"{float(v):.6f}"


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return path


def _write_json(path: Path, doc: dict[str, Any]) -> Path:
    path.write_text(json.dumps(_json_safe(doc), indent=2, allow_nan=False) + "\n")
    return path


def _prepare_out(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_scenario(args) -> tuple[ScenarioConfig, Any]:
    if not args.config:
        raise UsageError("--config is required for this command")
    config_path = Path(args.config)
    config = load_config(config_path)
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.ensemble_size is not None:
        overrides["ensemble_size"] = args.ensemble_size
    if args.selection is not None:
        overrides["selection"] = Selection.parse(args.selection)
    channels = resolve_channel(config.channel, config_path.parent)
    if not is_synthetic(config.channel):
        overrides["channel"] = str(resolve_channel_path(config.channel, config_path.parent))
    config = replace(config, **overrides)
    return config, channels


def _grid(spec: str) -> np.ndarray:
    try:
        return parse_grid(spec)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None


def _ecdf_rows(mrt_db, z3ro_db):
    mrt_sorted, frac = ecdf(mrt_db)
    z3ro_sorted, _ = ecdf(z3ro_db)
    return zip(frac, mrt_sorted, z3ro_sorted)


def cmd_scan(args) -> dict[str, Any]:
    config, channels = _load_scenario(args)
    k = args.users
    if len(config.users) != k:
        raise UsageError(f"--users {k} needs exactly {k} entries in the config 'users' list")
    for u in config.users:
        if not 0 <= u < channels.location_count:
            raise UsageError(f"user location {u} out of range for {channels.location_count} locations")
    out = _prepare_out(args.out)
    scan_fn = single_user_scan if k == 1 else two_user_scan
    scan = scan_fn(config, channels, threads=args.threads)

    at_user = reduction_statistics(scan.mrt, scan.z3ro, "at_user")
    all_loc = reduction_statistics(scan.mrt, scan.z3ro, "all_locations")
    files = [
        _write_csv(out / "at_user_ecdf.csv", ["fraction", "mrt_db", "z3ro_db"],
                   _ecdf_rows(at_user.mrt_db, at_user.z3ro_db)),
        _write_csv(out / "all_locations_ecdf.csv", ["fraction", "mrt_db", "z3ro_db"],
                   _ecdf_rows(all_loc.mrt_db, all_loc.z3ro_db)),
    ]
    idx = scan.index_of(config.users)
    tag = "-".join(str(u) for u in config.users)
    heat_rows = [
        (str(l), channels.location_ids[l], m, z)
        for l, (m, z) in enumerate(zip(scan.mrt[idx].distortion_db, scan.z3ro[idx].distortion_db))
    ]
    files.append(_write_csv(out / f"heatmap_user{tag}.csv",
                            ["location_index", "location_id", "mrt_db", "z3ro_db"], heat_rows))
    summary = {
        "users": k,
        "placements": len(scan.placements),
        "at_user": at_user.as_dict(),
        "all_locations": all_loc.as_dict(),
        "mean_db_gap": at_user.mean_db_gap,
        "tail_db_gap": at_user.tail_db_gap,
        "clamp_count": scan.clamp_count,
        "config": config_to_dict(config),
    }
    files.append(_write_json(out / "summary.json", summary))
    print(f"at-user reduction: mean {at_user.mean_db_gap:.2f} dB, "
          f"tail {at_user.tail_db_gap:.2f} dB over {at_user.gaps.size} values")
    return {"config": config_to_dict(config), "outputs": files, "clamp_count": scan.clamp_count}


def cmd_sweep(args) -> dict[str, Any]:
    config, channels = _load_scenario(args)
    grid = _grid(args.grid)
    out = _prepare_out(args.out)
    k = len(config.users)
    suffixes = [""] if k == 1 else [f"_u{u}" for u in config.users]
    rate_cols = [f"R_MRT{s}" for s in suffixes] + [f"R_Z3RO{s}" for s in suffixes]

    if args.axis == "noise":
        sigma = noise_for_snr_db(config, channels, grid)
        order = np.argsort(sigma, kind="stable")
        sweep = noise_sweep(config, channels, sigma[order])
        inv = np.argsort(order, kind="stable")
        mrt, z3ro = sweep.rate_mrt[inv], sweep.rate_z3ro[inv]
        header = ["snr_db"] + rate_cols
    else:
        sweep = backoff_sweep(config, channels, grid, threads=args.threads)
        mrt, z3ro = sweep.rate_mrt, sweep.rate_z3ro
        header = ["backoff_db"] + rate_cols
    rows = [[x, *m, *z] for x, m, z in zip(grid, mrt, z3ro)]
    files = [_write_csv(out / "sweep.csv", header, rows)]
    return {"config": config_to_dict(config), "outputs": files, "clamp_count": 0}


def cmd_pattern(args) -> dict[str, Any]:
    grid_deg = _grid(args.grid)
    angles = np.concatenate([grid_deg, [args.user_angle]])
    if np.any(np.abs(angles) > 90):
        raise UsageError("angles must lie in [-90, 90] degrees")
    selection = Selection.parse(args.selection or "smallest")
    out = _prepare_out(args.out)
    pattern = angular_pattern(
        args.m,
        np.radians(args.user_angle),
        np.radians(grid_deg),
        args.ms,
        pa=Polynomial3(),
        ensemble_size=args.ensemble_size or 200_000,
        seed=args.seed or 0,
        selection=selection,
    )
    rows = zip(grid_deg, pattern.mrt_db, pattern.z3ro_db)
    files = [_write_csv(out / "pattern.csv", ["angle_deg", "mrt_db", "z3ro_db"], rows)]
    echo = {
        "m": args.m, "user_angle_deg": args.user_angle, "grid": args.grid, "m_s": args.ms,
        "selection": selection.value, "pa": "polynomial3",
        "ensemble_size": args.ensemble_size or 200_000, "master_seed": args.seed or 0,
    }
    return {"config": echo, "outputs": files, "clamp_count": 0}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="DIR", required=True)
    common.add_argument("--seed", type=int)
    common.add_argument("--ensemble-size", type=int)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--selection", choices=["first", "smallest"])

    parser = _Parser(prog=PROG, description="Z3RO vs MRT distortion simulator")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    scan = sub.add_parser("scan", parents=[common], help="user-placement scan")
    scan.add_argument("--users", type=int, choices=[1, 2], default=1)
    scan.set_defaults(func=cmd_scan)

    sweep = sub.add_parser("sweep", parents=[common], help="rate sweep over noise or back-off")
    sweep.add_argument("--axis", choices=["noise", "backoff"], default="noise")
    sweep.add_argument("--grid", required=True, help="start:stop:points in dB")
    sweep.set_defaults(func=cmd_sweep)

    pattern = sub.add_parser("pattern", parents=[common], help="LOS third-order distortion pattern")
    pattern.add_argument("--m", type=int, default=32)
    pattern.add_argument("--user-angle", type=float, default=0.0, help="degrees")
    pattern.add_argument("--grid", default="-90:90:181", help="start:stop:points in degrees")
    pattern.add_argument("--ms", type=int, default=2)
    pattern.set_defaults(func=cmd_pattern)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    text = " ".join(str(message).split())
    print(f"{PROG}: error: {kind}: {text}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        result = args.func(args)
        out = Path(args.out)
        outputs = [str(p) for p in result["outputs"]]
        manifest = out / "manifest.json"
        _write_json(manifest, {
            "tool": PROG,
            "version": __version__,
            "command": args.command,
            "config": result["config"],
            "duration_s": time.perf_counter() - start,
            "outputs": outputs + [str(manifest)],
            "clamp_count": result["clamp_count"],
        })
        missing = [p for p in outputs if not Path(p).is_file()]
        if missing:
            return _fail("io", f"outputs missing after run: {', '.join(missing)}", 1)
        return 0
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except FileNotFoundError as exc:
        return _fail("missing-file", exc, 1)
    except OSError as exc:
        return _fail("io", exc, 1)
    except (SimulationError, ValueError) as exc:
        return _fail(type(exc).__name__, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
