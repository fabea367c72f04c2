"""Scenario config files and channel-source resolution.

A config file holds one ``key = value`` pair per line; ``#`` starts a comment.
Recognised keys::

    channel        path to a .csv/.json channel file, or a synthetic spec
                   rayleigh:M=32,L=8,seed=1
                   los_ula:M=32,angles=-60:60:25[,spacing=0.5]   (degrees)
    users          comma-separated location indices
    precoder       MRT | Z3RO
    m_s            saturated antennas per user
    selection      first | smallest
    pa             rapp | polynomial3 | ideal
    p_sat          rapp saturation power [W]
    smoothness     rapp smoothness S
    a1, a3         polynomial3 coefficients (complex literals allowed)
    backoff_db     10 log10(p_in / p_sat)
    noise_var      noise variance [W]
    ensemble_size  symbols per Monte-Carlo ensemble
    master_seed    seed from which all task seeds derive

Relative channel paths are looked up under ``$Z3RO_SIM_DATA`` first, then
next to the config file, then in the working directory.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .channel import ChannelSet, load_channel_set, los_ula_set, synth_rayleigh
from .errors import ParseError, ValidationError
from .experiments import ScenarioConfig
from .pa import Ideal, Polynomial3, Rapp
from .precoding import PrecoderKind, Selection

DATA_ENV = "Z3RO_SIM_DATA"

_PA_KEYS = {
    "rapp": {"p_sat", "smoothness"},
    "polynomial3": {"a1", "a3"},
    "ideal": set(),
}
KEYS = {
    "channel",
    "users",
    "precoder",
    "m_s",
    "selection",
    "pa",
    "backoff_db",
    "noise_var",
    "ensemble_size",
    "master_seed",
} | set().union(*_PA_KEYS.values())


def parse_grid(spec: str) -> np.ndarray:
    """``start:stop:points`` -> ascending linear grid; a single number is one point."""
    parts = spec.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValidationError(f"grid spec {spec!r} is not start:stop:points") from None
    if points < 1:
        raise ValidationError(f"grid spec {spec!r} has no points")
    if stop < start:
        raise ValidationError(f"grid spec {spec!r} runs backwards")
    if points == 1:
        return np.array([start])
    return np.linspace(start, stop, points)


def is_synthetic(spec: str) -> bool:
    kind, sep, _ = spec.partition(":")
    return bool(sep) and kind in ("rayleigh", "los_ula")


def _synthetic(spec: str) -> ChannelSet | None:
    if not is_synthetic(spec):
        return None
    kind, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValidationError(f"bad synthetic channel parameter {item!r} in {spec!r}")
        params[key.strip()] = value.strip()
    try:
        if kind == "rayleigh":
            return synth_rayleigh(int(params["M"]), int(params["L"]), int(params.get("seed", 0)))
        angles = np.radians(parse_grid(params["angles"]))
        return los_ula_set(int(params["M"]), angles, float(params.get("spacing", 0.5)))
    except KeyError as exc:
        raise ValidationError(f"synthetic channel {spec!r} is missing {exc}") from None


def resolve_channel_path(spec: str, config_dir: Path | None = None) -> Path:
    path = Path(spec).expanduser()
    if path.is_absolute():
        candidates = [path]
    else:
        roots = []
        if os.environ.get(DATA_ENV):
            roots.append(Path(os.environ[DATA_ENV]))
        if config_dir is not None:
            roots.append(config_dir)
        roots.append(Path.cwd())
        candidates = [root / path for root in roots]
    for c in candidates:
        if c.is_file():
            return c.resolve()
    tried = ", ".join(str(c) for c in candidates)
    raise FileNotFoundError(f"channel file {spec!r} not found (tried {tried})")


def resolve_channel(spec: str, config_dir: Path | None = None) -> ChannelSet:
    """Load or synthesize the channel set named by ``spec``."""
    if not spec:
        raise ValidationError("no channel source configured")
    synthetic = _synthetic(spec)
    if synthetic is not None:
        return synthetic
    return load_channel_set(resolve_channel_path(spec, config_dir))


def _build_pa(name: str, values: Mapping[str, Any]):
    if name == "rapp":
        return Rapp(float(values.get("p_sat", 1.0)), float(values.get("smoothness", 2.0)))
    if name == "polynomial3":
        return Polynomial3(complex(values.get("a1", 1.0)), complex(values.get("a3", -0.05)))
    if name == "ideal":
        return Ideal()
    raise ValidationError(f"unknown amplifier model {name!r}; use rapp|polynomial3|ideal")


def _pa_dict(pa) -> dict[str, Any]:
    if isinstance(pa, Rapp):
        return {"pa": "rapp", "p_sat": pa.saturation_power, "smoothness": pa.smoothness}
    if isinstance(pa, Polynomial3):
        return {"pa": "polynomial3", "a1": str(complex(pa.linear_gain)), "a3": str(complex(pa.cubic_coeff))}
    return {"pa": "ideal"}


def config_to_dict(config: ScenarioConfig) -> dict[str, Any]:
    out = {
        "channel": config.channel,
        "users": list(config.users),
        "precoder": config.precoder.value,
        "m_s": config.m_s,
        "selection": config.selection.value,
        "backoff_db": config.backoff_db,
        "noise_var": config.noise_var,
        "ensemble_size": config.ensemble_size,
        "master_seed": config.master_seed,
    }
    out.update(_pa_dict(config.pa))
    return out


def config_from_dict(values: Mapping[str, Any]) -> ScenarioConfig:
    unknown = set(values) - KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    pa_name = str(values.get("pa", "rapp")).lower()
    if pa_name not in _PA_KEYS:
        raise ValidationError(f"unknown amplifier model {pa_name!r}; use rapp|polynomial3|ideal")
    stray = (set(values) & set().union(*_PA_KEYS.values())) - _PA_KEYS[pa_name]
    if stray:
        raise ValidationError(f"keys {', '.join(sorted(stray))} do not apply to pa={pa_name}")
    users = values.get("users", [0])
    if isinstance(users, str):
        users = [int(u) for u in users.replace(" ", "").split(",") if u]
    kwargs: dict[str, Any] = {
        "channel": str(values.get("channel", "")),
        "users": tuple(int(u) for u in users),
        "pa": _build_pa(pa_name, values),
    }
    if "precoder" in values:
        try:
            kwargs["precoder"] = PrecoderKind(str(values["precoder"]).upper())
        except ValueError:
            raise ValidationError(f"unknown precoder {values['precoder']!r}; use MRT|Z3RO") from None
    if "selection" in values:
        kwargs["selection"] = Selection.parse(values["selection"])
    for key, cast in (
        ("m_s", int),
        ("backoff_db", float),
        ("noise_var", float),
        ("ensemble_size", int),
        ("master_seed", int),
    ):
        if key in values:
            kwargs[key] = cast(values[key])
    return ScenarioConfig(**kwargs)


def read_config_text(text: str, path=None) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", line=lineno, path=path)
        if key not in KEYS:
            raise ParseError(f"unknown key {key!r}", line=lineno, path=path)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", line=lineno, path=path)
        values[key] = value
    return values


def load_config(path) -> ScenarioConfig:
    """Parse a config file; channel paths stay as written (see :func:`resolve_channel`)."""
    path = Path(path)
    values = read_config_text(path.read_text(), path)
    try:
        return config_from_dict(values)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc), path=path) from None


def format_config(values: Mapping[str, Any]) -> str:
    """Render a config dict back to the key-value text format."""
    lines = []
    for key, value in values.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
