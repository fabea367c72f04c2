"""MRT and Z3RO precoders, power bookkeeping and symbol superposition.

Both precoders are built per user and normalized so that every weight column
carries ``sum_m |w[m, k]|^2 = M``. With symbols of variance ``p_k`` the average
power at each amplifier input is then ``p_in = sum_k p_k``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import UserChannel
from .errors import SingularityError, ValidationError

__all__ = [
    "PrecoderKind",
    "Selection",
    "PrecoderWeights",
    "PowerBudget",
    "mrt_weights",
    "z3ro_weights",
    "saturated_set",
    "precode_symbols",
    "scale_to_backoff",
    "third_order_null_sum",
    "write_weights_csv",
]


class PrecoderKind(str, enum.Enum):
    MRT = "MRT"
    Z3RO = "Z3RO"


class Selection(str, enum.Enum):
    """Which antennas a Z3RO precoder saturates."""

    FIRST_INDICES = "first_indices"
    SMALLEST_GAINS = "smallest_gains"

    @classmethod
    def parse(cls, value) -> "Selection":
        if isinstance(value, cls):
            return value
        aliases = {"first": cls.FIRST_INDICES, "smallest": cls.SMALLEST_GAINS}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ValidationError(
                f"unknown selection {value!r}; use first|smallest|first_indices|smallest_gains"
            ) from None


@dataclass(frozen=True)
class PrecoderWeights:
    """Weight matrix ``weights[m, k]`` and its per-user construction details.

    ``gamma`` is 1.0 for MRT users and ``saturated_sets`` is empty for them.
    """

    weights: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    saturated_sets: tuple[tuple[int, ...], ...]
    kind: PrecoderKind

    def __post_init__(self):
        for name in ("weights", "alpha", "gamma"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def antenna_count(self) -> int:
        return self.weights.shape[0]

    @property
    def user_count(self) -> int:
        return self.weights.shape[1]

    @property
    def saturated_count(self) -> int:
        return len(self.saturated_sets[0]) if self.saturated_sets else 0


@dataclass(frozen=True)
class PowerBudget:
    """Per-user symbol powers and amplifier saturation power (watts)."""

    per_user_power: tuple[float, ...]
    saturation_power: float = 1.0

    def __post_init__(self):
        powers = tuple(float(p) for p in np.atleast_1d(self.per_user_power))
        if not powers or any(not p > 0 or not np.isfinite(p) for p in powers):
            raise ValidationError(f"per-user powers must be positive and finite, got {powers}")
        if not self.saturation_power > 0 or not np.isfinite(self.saturation_power):
            raise ValidationError(f"saturation power must be positive, got {self.saturation_power}")
        object.__setattr__(self, "per_user_power", powers)

    @classmethod
    def from_backoff_db(cls, backoff_db: float, users: int = 1, saturation_power: float = 1.0):
        """Equal split of ``p_in = p_sat * 10**(backoff_db / 10)`` over ``users``."""
        if not np.isfinite(backoff_db):
            raise ValidationError(f"back-off must be finite, got {backoff_db}")
        if users < 1:
            raise ValidationError(f"need at least one user, got {users}")
        p_in = saturation_power * 10.0 ** (backoff_db / 10.0)
        return cls((p_in / users,) * users, saturation_power)

    @property
    def input_power(self) -> float:
        return float(sum(self.per_user_power))

    def total_power(self, antennas: int) -> float:
        return antennas * self.input_power

    @property
    def backoff(self) -> float:
        return self.input_power / self.saturation_power

    @property
    def backoff_db(self) -> float:
        return 10.0 * np.log10(self.backoff)


def _channel_matrix(channels: Sequence[UserChannel | np.ndarray]) -> np.ndarray:
    if len(channels) == 0:
        raise ValidationError("need at least one user channel")
    cols = [c.gains if isinstance(c, UserChannel) else UserChannel(np.asarray(c)).gains for c in channels]
    m = cols[0].shape[0]
    if any(c.shape[0] != m for c in cols):
        raise ValidationError("user channels have different antenna counts")
    return np.stack(cols, axis=1)


def mrt_weights(channels: Sequence[UserChannel]) -> PrecoderWeights:
    """Maximum-ratio weights ``alpha_k * conj(h[m, k])``."""
    h = _channel_matrix(channels)
    m, k = h.shape
    energy = np.sum(np.abs(h) ** 2, axis=0)
    alpha = np.sqrt(m / energy)
    return PrecoderWeights(
        weights=alpha * h.conj(),
        alpha=alpha,
        gamma=np.ones(k),
        saturated_sets=(),
        kind=PrecoderKind.MRT,
    )


def saturated_set(h: np.ndarray, m_s: int, selection: Selection) -> np.ndarray:
    """Indices of the ``m_s`` antennas that get the inverted, boosted weight."""
    if selection is Selection.FIRST_INDICES:
        return np.arange(m_s)
    # stable sort keeps the lower antenna index first among equal gains
    order = np.argsort(np.abs(h), kind="stable")
    return np.sort(order[:m_s])


def z3ro_weights(
    channels: Sequence[UserChannel],
    m_s: int,
    selection: Selection | str = Selection.SMALLEST_GAINS,
) -> PrecoderWeights:
    """Zero-third-order weights, built independently for each user.

    For user ``k`` with saturated set ``S``::

        gamma = (sum_{m not in S} |h_m|^4 / sum_{m in S} |h_m|^4) ** (1/3)
        w_m   = alpha * conj(h_m) * (-gamma if m in S else 1)

    so that ``sum_m h_m w_m |w_m|^2 = 0`` and ``sum_m |w_m|^2 = M``.
    """
    selection = Selection.parse(selection)
    h = _channel_matrix(channels)
    m, k = h.shape
    m_s = int(m_s)
    if not 1 <= m_s < m:
        raise ValidationError(f"saturated antenna count must satisfy 1 <= M_s < M={m}, got {m_s}")

    w = np.empty_like(h)
    alpha = np.empty(k)
    gamma = np.empty(k)
    sets = []
    for u in range(k):
        hu = h[:, u]
        sat = saturated_set(hu, m_s, selection)
        mask = np.zeros(m, dtype=bool)
        mask[sat] = True
        g2 = np.abs(hu) ** 2
        sat4 = np.sum(g2[mask] ** 2)
        if sat4 == 0:
            raise SingularityError(f"user {u}: all saturated antennas have zero channel gain")
        gamma[u] = (np.sum(g2[~mask] ** 2) / sat4) ** (1.0 / 3.0)
        alpha[u] = np.sqrt(m) / np.sqrt(np.sum(g2[~mask]) + gamma[u] ** 2 * np.sum(g2[mask]))
        w[:, u] = alpha[u] * hu.conj() * np.where(mask, -gamma[u], 1.0)
        sets.append(tuple(int(i) for i in sat))

    return PrecoderWeights(
        weights=w, alpha=alpha, gamma=gamma, saturated_sets=tuple(sets), kind=PrecoderKind.Z3RO
    )


def third_order_null_sum(h, w) -> tuple[complex, float]:
    """Return ``sum_m h_m w_m |w_m|^2`` and the sum of its term magnitudes."""
    terms = np.asarray(h) * np.asarray(w) * np.abs(w) ** 2
    return complex(np.sum(terms)), float(np.sum(np.abs(terms)))


def precode_symbols(weights: PrecoderWeights, symbols) -> np.ndarray:
    """Superpose user symbols onto antennas: ``x[n, m] = sum_k w[m, k] s[n, k]``."""
    s = np.asarray(symbols, dtype=np.complex128)
    if s.ndim == 1:
        s = s[:, None]
    if s.ndim != 2 or s.shape[1] != weights.user_count:
        raise ValidationError(
            f"symbol block of shape {s.shape} does not match {weights.user_count} users"
        )
    return s @ weights.weights.T


def scale_to_backoff(x, budget: PowerBudget) -> np.ndarray:
    """Rescale an ``N x M`` block so its mean per-antenna power equals ``p_in``.

    For symbols already drawn with variance ``p_k`` and normalized weights the
    factor is one up to sampling noise.
    """
    x = np.asarray(x, dtype=np.complex128)
    power = np.mean(x.real**2 + x.imag**2)
    if power == 0:
        raise ValidationError("input block has zero power")
    return x * np.sqrt(budget.input_power / power)


def write_weights_csv(weights: PrecoderWeights, path) -> Path:
    """Dump weights in the channel CSV layout (antennas as rows, users as re/im pairs)."""
    path = Path(path)
    lines = [f"# M={weights.antenna_count} L={weights.user_count}"]
    for row in weights.weights.tolist():
        lines.append(",".join(f"{v.real!r},{v.imag!r}" for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path
