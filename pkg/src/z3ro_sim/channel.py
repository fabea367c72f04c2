"""Channel containers, file I/O and synthetic channel generators.

Channels are frequency-flat: one complex gain per (antenna, location) pair.
Gains are stored antenna-major, ``gains[m, l]``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import BoundsError, ParseError, ValidationError

__all__ = [
    "ChannelSet",
    "UserChannel",
    "load_channel_set",
    "write_channel_set",
    "select_user_channel",
    "synth_los_ula",
    "synth_rayleigh",
]

_HEADER_RE = re.compile(r"^#\s*M\s*=\s*(\d+)\s+L\s*=\s*(\d+)\s*$")


def _frozen_complex(values, ndim: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128, copy=True)
    if arr.ndim != ndim:
        raise ValidationError(f"{what} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChannelSet:
    """Complex channel gains from ``M`` antennas to ``L`` locations.

    Parameters
    ----------
    gains : array_like, shape (M, L)
        Complex gain from antenna ``m`` to location ``l``.
    location_ids : sequence of str, optional
        Unique label per location. Defaults to ``"0" .. "L-1"``.
    metadata : mapping, optional
        Free-form description (carrier frequency, array type, heights ...).
    """

    gains: np.ndarray
    location_ids: tuple[str, ...] = ()
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        gains = _frozen_complex(self.gains, 2, "channel gains")
        m, l = gains.shape
        if m < 1 or l < 1:
            raise ValidationError(f"channel set needs M >= 1 and L >= 1, got {gains.shape}")
        ids = tuple(str(i) for i in self.location_ids) or tuple(str(i) for i in range(l))
        if len(ids) != l:
            raise ValidationError(f"{len(ids)} location ids for {l} locations")
        if len(set(ids)) != l:
            raise ValidationError("location ids must be unique")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "location_ids", ids)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def antenna_count(self) -> int:
        return self.gains.shape[0]

    @property
    def location_count(self) -> int:
        return self.gains.shape[1]

    def user_channels(self, indices: Sequence[int]) -> list[UserChannel]:
        return [select_user_channel(self, i) for i in indices]


@dataclass(frozen=True)
class UserChannel:
    """Channel vector ``h[m]`` from every antenna to one user."""

    gains: np.ndarray
    source_location: str | None = None

    def __post_init__(self):
        gains = _frozen_complex(self.gains, 1, "user channel")
        if gains.size == 0 or not np.any(gains != 0):
            raise ValidationError("user channel must have at least one non-zero gain")
        object.__setattr__(self, "gains", gains)

    @property
    def antenna_count(self) -> int:
        return self.gains.shape[0]

    @property
    def squared_norm(self) -> float:
        return float(np.sum(np.abs(self.gains) ** 2))


def _pairs_to_complex(pairs: np.ndarray) -> np.ndarray:
    # assigning parts keeps signed zeros that re + 1j*im would lose
    out = np.empty(pairs.shape[:-1], dtype=np.complex128)
    out.real = pairs[..., 0]
    out.imag = pairs[..., 1]
    return out


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise ValidationError(f"unknown channel file format {fmt!r} (expected csv or json)")
    return fmt


def _parse_csv(text: str, path: Path) -> ChannelSet:
    lines = text.splitlines()
    if not lines or not "".join(lines).strip():
        raise ValidationError(f"{path}: channel file is empty")
    header = _HEADER_RE.match(lines[0].strip())
    if header is None:
        raise ParseError("expected header '# M=<int> L=<int>'", line=1, path=path)
    m, l = int(header.group(1)), int(header.group(2))
    if m < 1 or l < 1:
        raise ValidationError(f"{path}: header declares M={m}, L={l}; both must be >= 1")

    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        fields = raw.split(",")
        if len(fields) != 2 * l:
            raise ParseError(f"expected {2 * l} fields, found {len(fields)}", line=lineno, path=path)
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise ParseError(f"bad number ({exc})", line=lineno, path=path) from None
        if not all(math.isfinite(v) for v in values):
            raise ValidationError(f"{path}: line {lineno}: non-finite channel gain")
        rows.append(values)
    if len(rows) != m:
        raise ParseError(f"header declares M={m} antenna rows, found {len(rows)}", path=path)

    pairs = np.asarray(rows, dtype=np.float64).reshape(m, l, 2)
    return ChannelSet(gains=_pairs_to_complex(pairs), metadata={"source": str(path)})


def _parse_json(text: str, path: Path) -> ChannelSet:
    if not text.strip():
        raise ValidationError(f"{path}: channel file is empty")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=path) from None
    try:
        m, l = int(doc["m"]), int(doc["l"])
        arr = np.asarray(doc["gains"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed channel document: {exc}", path=path) from None
    if arr.shape != (m, l, 2):
        raise ParseError(f"gains has shape {arr.shape}, expected ({m}, {l}, 2)", path=path)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{path}: non-finite channel gain")
    metadata = dict(doc.get("metadata") or {})
    metadata.setdefault("source", str(path))
    return ChannelSet(
        gains=_pairs_to_complex(arr),
        location_ids=tuple(doc.get("location_ids") or ()),
        metadata=metadata,
    )


def load_channel_set(path, format: str | None = None) -> ChannelSet:
    """Read a channel matrix written in the CSV or JSON channel format.

    The CSV layout is a ``# M=<int> L=<int>`` header followed by one line per
    antenna holding ``re_0,im_0,...,re_{L-1},im_{L-1}``. The JSON layout is
    an object with keys ``m``, ``l``, ``location_ids`` and ``gains`` (nested
    ``[M][L][2]``). ``format`` defaults to the file extension.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    text = path.read_text()
    if fmt == "csv":
        return _parse_csv(text, path)
    return _parse_json(text, path)


def write_channel_set(channels: ChannelSet, path, format: str | None = None) -> Path:
    """Write ``channels`` so that :func:`load_channel_set` reproduces it exactly."""
    path = Path(path)
    fmt = _infer_format(path, format)
    g = channels.gains
    if fmt == "csv":
        lines = [f"# M={channels.antenna_count} L={channels.location_count}"]
        for row in g:
            lines.append(",".join(f"{v.real!r},{v.imag!r}" for v in row.tolist()))
        path.write_text("\n".join(lines) + "\n")
    else:
        doc = {
            "m": channels.antenna_count,
            "l": channels.location_count,
            "location_ids": list(channels.location_ids),
            "metadata": {k: v for k, v in channels.metadata.items() if k != "source"},
            "gains": [[[v.real, v.imag] for v in row.tolist()] for row in g],
        }
        path.write_text(json.dumps(doc))
    return path


def select_user_channel(channels: ChannelSet, location_index: int) -> UserChannel:
    """Return column ``location_index`` of ``channels`` as a user channel."""
    idx = int(location_index)
    if not 0 <= idx < channels.location_count:
        raise BoundsError(
            f"location index {idx} out of range for {channels.location_count} locations"
        )
    column = channels.gains[:, idx]
    if not np.any(column != 0):
        raise ValidationError(f"location {channels.location_ids[idx]!r} has an all-zero channel")
    return UserChannel(gains=column, source_location=channels.location_ids[idx])


def ula_steering(m: int, angles, element_spacing: float = 0.5, gain: float = 1.0) -> np.ndarray:
    """Line-of-sight ULA gains, shape ``(m, len(angles))``."""
    if m < 1:
        raise ValidationError(f"antenna count must be >= 1, got {m}")
    if element_spacing <= 0:
        raise ValidationError(f"element spacing must be positive, got {element_spacing}")
    if gain <= 0:
        raise ValidationError(f"gain must be positive, got {gain}")
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    phase = 2 * np.pi * element_spacing * np.outer(np.arange(m), np.sin(angles))
    return gain * np.exp(1j * phase)


def synth_los_ula(m: int, angle: float, element_spacing: float = 0.5, gain: float = 1.0) -> UserChannel:
    """Steering vector ``gain * exp(j 2 pi d m sin(angle))`` of a uniform linear array."""
    return UserChannel(gains=ula_steering(m, [angle], element_spacing, gain)[:, 0])


def los_ula_set(m: int, angles, element_spacing: float = 0.5, gain: float = 1.0) -> ChannelSet:
    """One ULA steering vector per angle, packed as a channel set."""
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    return ChannelSet(
        gains=ula_steering(m, angles, element_spacing, gain),
        location_ids=tuple(f"{np.degrees(a):.6f}deg#{i}" for i, a in enumerate(angles)),
        metadata={"array": "ULA", "element_spacing": element_spacing, "synthetic": "los_ula"},
    )


def synth_rayleigh(m: int, l: int, seed: int) -> ChannelSet:
    """I.i.d. unit-variance circularly-symmetric complex Gaussian gains."""
    if m < 1 or l < 1:
        raise ValidationError(f"M and L must be >= 1, got M={m}, L={l}")
    rng = np.random.default_rng(seed)
    g = (rng.standard_normal((m, l)) + 1j * rng.standard_normal((m, l))) / np.sqrt(2)
    return ChannelSet(gains=g, metadata={"synthetic": "rayleigh", "seed": seed})
