"""Scenario evaluation and the scans built on it.

Every scan is a list of independent tasks (one per user placement, user pair
or grid point). Task ``i`` draws its symbols from ``(master_seed, i)``, and MRT
and Z3RO inside a task share that ensemble, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from .analysis import BussgangResult, bussgang_analysis, draw_symbols, rate, sndr, to_db
from .channel import ChannelSet, los_ula_set, select_user_channel, synth_los_ula
from .errors import BoundsError, ValidationError
from .pa import Ideal, PaModel, Polynomial3, Rapp
from .precoding import (
    PowerBudget,
    PrecoderKind,
    PrecoderWeights,
    Selection,
    mrt_weights,
    z3ro_weights,
)

__all__ = [
    "ScenarioConfig",
    "DistortionReport",
    "ScanResult",
    "ReductionStatistics",
    "NoiseSweep",
    "BackoffSweep",
    "AngularPattern",
    "build_weights",
    "evaluate_scenario",
    "single_user_scan",
    "two_user_scan",
    "noise_sweep",
    "noise_for_snr_db",
    "backoff_sweep",
    "angular_pattern",
    "ecdf",
    "reduction_statistics",
]

PAPER_BACKOFF_DB = -3.1


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs of one simulated downlink scenario.

    ``channel`` is a file path or a synthetic spec understood by
    :func:`z3ro_sim.config.resolve_channel`; the experiment functions take
    the resolved :class:`ChannelSet` separately.
    """

    channel: str = ""
    users: tuple[int, ...] = (0,)
    precoder: PrecoderKind = PrecoderKind.Z3RO
    m_s: int = 2
    selection: Selection = Selection.SMALLEST_GAINS
    pa: PaModel = field(default_factory=Rapp)
    backoff_db: float = PAPER_BACKOFF_DB
    noise_var: float = 0.0
    ensemble_size: int = 200_000
    master_seed: int = 0

    def __post_init__(self):
        users = tuple(int(u) for u in self.users)
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "precoder", PrecoderKind(self.precoder))
        object.__setattr__(self, "selection", Selection.parse(self.selection))
        if not users:
            raise ValidationError("at least one user location is required")
        if len(set(users)) != len(users):
            raise ValidationError(f"user locations must be distinct, got {list(users)}")
        if any(u < 0 for u in users):
            raise ValidationError(f"user locations must be non-negative, got {list(users)}")
        if not np.isfinite(self.backoff_db):
            raise ValidationError("back-off must be finite")
        if self.noise_var < 0:
            raise ValidationError(f"noise variance must be >= 0, got {self.noise_var}")
        if self.ensemble_size < 1:
            raise ValidationError(f"ensemble size must be >= 1, got {self.ensemble_size}")
        if self.m_s < 1:
            raise ValidationError(f"M_s must be >= 1, got {self.m_s}")

    @property
    def saturation_power(self) -> float:
        return self.pa.saturation_power if isinstance(self.pa, Rapp) else 1.0

    def budget(self, users: int | None = None) -> PowerBudget:
        k = len(self.users) if users is None else users
        return PowerBudget.from_backoff_db(self.backoff_db, k, self.saturation_power)

    def echo(self) -> dict[str, Any]:
        """Plain-dict view; :func:`z3ro_sim.config.config_from_dict` inverts it."""
        from .config import config_to_dict

        return config_to_dict(self)


@dataclass(frozen=True)
class DistortionReport:
    """Outcome of one precoder on one user placement.

    ``distortion_db`` is the nonlinear distortion level at every location
    (joint projection on all user symbols). ``at_user_distortion`` is the
    per-user SNIDR denominator term at that user's own location, which also
    absorbs inter-user interference when ``K > 1``.
    """

    kind: PrecoderKind
    users: tuple[int, ...]
    distortion: np.ndarray
    at_user_distortion: np.ndarray
    at_user_signal: np.ndarray
    noise_var: float
    clamp_count: int
    scenario: dict[str, Any]
    bussgang: BussgangResult | None = None

    @property
    def distortion_db(self) -> np.ndarray:
        return to_db(np.atleast_1d(self.distortion))

    @property
    def at_user_distortion_db(self) -> np.ndarray:
        return to_db(np.atleast_1d(self.at_user_distortion))

    def sndr(self, noise_var: float | None = None) -> np.ndarray:
        nv = self.noise_var if noise_var is None else noise_var
        return np.array(
            [sndr(s, d, nv) for s, d in zip(self.at_user_signal, self.at_user_distortion)]
        )

    def rate(self, noise_var: float | None = None) -> np.ndarray:
        return np.atleast_1d(rate(self.sndr(noise_var)))


@dataclass(frozen=True)
class ScanResult:
    """Paired MRT/Z3RO reports, one pair per placement (or per user pair)."""

    placements: tuple[tuple[int, ...], ...]
    mrt: tuple[DistortionReport, ...]
    z3ro: tuple[DistortionReport, ...]

    def index_of(self, users: Sequence[int]) -> int:
        key = tuple(sorted(int(u) for u in users))
        for i, p in enumerate(self.placements):
            if tuple(sorted(p)) == key:
                return i
        raise BoundsError(f"placement {list(users)} is not part of this scan")

    @property
    def clamp_count(self) -> int:
        return sum(r.clamp_count for r in self.mrt + self.z3ro)


def build_weights(
    kind: PrecoderKind, channels: ChannelSet, users: Sequence[int], m_s: int, selection
) -> PrecoderWeights:
    user_channels = [select_user_channel(channels, u) for u in users]
    if PrecoderKind(kind) is PrecoderKind.MRT:
        return mrt_weights(user_channels)
    return z3ro_weights(user_channels, m_s, selection)


def _report(kind, users, result: BussgangResult, scenario, keep_bussgang) -> DistortionReport:
    idx = np.arange(len(users))
    return DistortionReport(
        kind=PrecoderKind(kind),
        users=tuple(users),
        distortion=result.total_distortion_var,
        at_user_distortion=result.distortion_var[list(users), idx],
        at_user_signal=result.signal_var[list(users), idx],
        noise_var=result.noise_var,
        clamp_count=result.clamp_count,
        scenario=scenario,
        bussgang=result if keep_bussgang else None,
    )


def _check_users(channels: ChannelSet, users: Sequence[int]) -> None:
    for u in users:
        if not 0 <= u < channels.location_count:
            raise BoundsError(
                f"user location {u} out of range for {channels.location_count} locations"
            )


def _evaluate_pair(config: ScenarioConfig, channels: ChannelSet, users, task_index, keep):
    """MRT and Z3RO on one shared ensemble."""
    budget = config.budget(len(users))
    ensemble = draw_symbols(
        len(users), config.ensemble_size, budget.per_user_power, (config.master_seed, task_index)
    )
    scenario = _scenario_echo(config)
    out = []
    for kind in (PrecoderKind.MRT, PrecoderKind.Z3RO):
        w = build_weights(kind, channels, users, config.m_s, config.selection)
        res = bussgang_analysis(channels, w, config.pa, ensemble, noise_var=config.noise_var)
        out.append(_report(kind, users, res, scenario, keep))
    return tuple(out)


def _scenario_echo(config: ScenarioConfig) -> dict[str, Any]:
    echo = config.echo()
    for key in ("users", "precoder"):
        echo.pop(key, None)
    return echo


def evaluate_scenario(
    config: ScenarioConfig, channels: ChannelSet, task_index: int = 0
) -> DistortionReport:
    """Evaluate ``config.precoder`` for the users in ``config.users``."""
    _check_users(channels, config.users)
    budget = config.budget()
    ensemble = draw_symbols(
        len(config.users),
        config.ensemble_size,
        budget.per_user_power,
        (config.master_seed, task_index),
    )
    w = build_weights(config.precoder, channels, config.users, config.m_s, config.selection)
    res = bussgang_analysis(channels, w, config.pa, ensemble, noise_var=config.noise_var)
    return _report(config.precoder, config.users, res, _scenario_echo(config), True)


def _run_tasks(fn: Callable[[int], Any], count: int, threads: int) -> list:
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _scan(config, channels, placements, threads, keep) -> ScanResult:
    for p in placements:
        _check_users(channels, p)

    def task(i):
        return _evaluate_pair(config, channels, placements[i], i, keep)

    pairs = _run_tasks(task, len(placements), threads)
    return ScanResult(
        placements=tuple(tuple(p) for p in placements),
        mrt=tuple(p[0] for p in pairs),
        z3ro=tuple(p[1] for p in pairs),
    )


def single_user_scan(
    config: ScenarioConfig, channels: ChannelSet, threads: int = 1, keep_bussgang: bool = False
) -> ScanResult:
    """Place one user at every location in turn; ``config.users`` is ignored."""
    placements = [(l,) for l in range(channels.location_count)]
    return _scan(config, channels, placements, threads, keep_bussgang)


def two_user_scan(
    config: ScenarioConfig, channels: ChannelSet, threads: int = 1, keep_bussgang: bool = False
) -> ScanResult:
    """Every unordered pair of distinct locations, equal power split."""
    if channels.location_count < 2:
        raise ValidationError("a two-user scan needs at least two locations")
    placements = list(itertools.combinations(range(channels.location_count), 2))
    return _scan(config, channels, placements, threads, keep_bussgang)


@dataclass(frozen=True)
class NoiseSweep:
    noise_var: np.ndarray
    snr_db: np.ndarray
    rate_mrt: np.ndarray  # (grid, K)
    rate_z3ro: np.ndarray


def noise_for_snr_db(config: ScenarioConfig, channels: ChannelSet, snr_db) -> np.ndarray:
    """Noise variances giving ``p M ||h||^2 / sigma^2 = snr_db`` for the first user."""
    h = select_user_channel(channels, config.users[0])
    p = config.budget().per_user_power[0]
    return p * h.antenna_count * h.squared_norm / 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def noise_sweep(config: ScenarioConfig, channels: ChannelSet, sigma_grid) -> NoiseSweep:
    """Rates of both precoders over a grid of noise variances at fixed back-off.

    Distortion does not depend on the noise, so each precoder is simulated
    once and the grid is applied analytically.
    """
    grid = np.asarray(sigma_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("noise grid must be a non-empty vector")
    if np.any(~(grid > 0)) or np.any(np.diff(grid) < 0):
        raise ValidationError("noise grid must be positive and sorted ascending")
    _check_users(channels, config.users)
    mrt, z3ro = _evaluate_pair(config, channels, config.users, 0, False)
    h = select_user_channel(channels, config.users[0])
    p = config.budget().per_user_power[0]
    snr = to_db(p * h.antenna_count * h.squared_norm / grid)
    return NoiseSweep(
        noise_var=grid,
        snr_db=np.atleast_1d(snr),
        rate_mrt=np.array([mrt.rate(nv) for nv in grid]),
        rate_z3ro=np.array([z3ro.rate(nv) for nv in grid]),
    )


@dataclass(frozen=True)
class BackoffSweep:
    backoff_db: np.ndarray
    rate_mrt: np.ndarray
    rate_z3ro: np.ndarray


def backoff_sweep(config: ScenarioConfig, channels: ChannelSet, backoff_grid_db, threads: int = 1):
    """Rates of both precoders over a grid of back-off values at fixed noise.

    All grid points reuse task index 0, i.e. the same underlying Gaussian
    draws scaled to each power level.
    """
    grid = np.asarray(backoff_grid_db, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("back-off grid must be a non-empty vector")
    _check_users(channels, config.users)

    def task(i):
        cfg = replace(config, backoff_db=float(grid[i]))
        mrt, z3ro = _evaluate_pair(cfg, channels, cfg.users, 0, False)
        return mrt.rate(), z3ro.rate()

    rows = _run_tasks(task, grid.size, threads)
    return BackoffSweep(
        backoff_db=grid,
        rate_mrt=np.array([r[0] for r in rows]),
        rate_z3ro=np.array([r[1] for r in rows]),
    )


@dataclass(frozen=True)
class AngularPattern:
    angles: np.ndarray
    mrt_db: np.ndarray
    z3ro_db: np.ndarray


def angular_pattern(
    m: int,
    user_angle: float,
    angle_grid,
    m_s: int,
    pa: PaModel | None = None,
    power: float = 1.0,
    ensemble_size: int = 200_000,
    seed: int = 0,
    selection=Selection.SMALLEST_GAINS,
    element_spacing: float = 0.5,
) -> AngularPattern:
    """Distortion level seen at each grid angle for a LOS user at ``user_angle``.

    The default amplifier is the cubic surrogate, so the levels are the
    third-order distortion radiation pattern.
    """
    pa = Polynomial3() if pa is None else pa
    angles = np.atleast_1d(np.asarray(angle_grid, dtype=np.float64))
    if angles.size == 0:
        empty = np.empty(0)
        return AngularPattern(angles=empty, mrt_db=empty, z3ro_db=empty)
    user = synth_los_ula(m, user_angle, element_spacing)
    observers = los_ula_set(m, angles, element_spacing)
    ensemble = draw_symbols(1, ensemble_size, power, (seed, 0))
    levels = []
    for w in (mrt_weights([user]), z3ro_weights([user], m_s, selection)):
        res = bussgang_analysis(observers, w, pa, ensemble)
        levels.append(to_db(res.total_distortion_var))
    return AngularPattern(angles=angles, mrt_db=levels[0], z3ro_db=levels[1])


def ecdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Sorted values and their cumulative fractions ``(i + 1) / n``."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise ValidationError("ECDF of an empty sample")
    return v, np.arange(1, v.size + 1) / v.size


@dataclass(frozen=True)
class ReductionStatistics:
    """MRT-minus-Z3RO distortion gaps in dB (positive means Z3RO is lower).

    ``mean_db_gap`` averages per-placement dB differences; ``mean_power_db_gap``
    is the alternative convention, the dB ratio of mean linear powers.
    ``tail_db_gap`` compares the 95th percentiles of the two ECDFs and
    ``max_db_gap`` their maxima.
    """

    mean_db_gap: float
    tail_db_gap: float
    max_db_gap: float
    mean_power_db_gap: float
    gaps: np.ndarray
    mrt_db: np.ndarray
    z3ro_db: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return {
            "mean_db_gap": self.mean_db_gap,
            "tail_db_gap": self.tail_db_gap,
            "max_db_gap": self.max_db_gap,
            "mean_power_db_gap": self.mean_power_db_gap,
            "count": int(self.gaps.size),
        }


TAIL_PERCENTILE = 95.0


def _levels(reports: Sequence[DistortionReport], mode: str) -> np.ndarray:
    if mode == "at_user":
        parts = [np.atleast_1d(r.at_user_distortion) for r in reports]
    elif mode == "all_locations":
        parts = [np.atleast_1d(r.distortion) for r in reports]
    else:
        raise ValidationError(f"unknown mode {mode!r}; use at_user or all_locations")
    return np.concatenate(parts)


def reduction_statistics(
    mrt_reports: Sequence[DistortionReport],
    z3ro_reports: Sequence[DistortionReport],
    mode: str = "at_user",
) -> ReductionStatistics:
    """Compare paired MRT and Z3RO reports placement by placement."""
    if isinstance(mrt_reports, DistortionReport):
        mrt_reports, z3ro_reports = [mrt_reports], [z3ro_reports]
    if len(mrt_reports) != len(z3ro_reports) or not mrt_reports:
        raise ValidationError("need the same, non-zero number of MRT and Z3RO reports")
    for a, b in zip(mrt_reports, z3ro_reports):
        if a.scenario != b.scenario or a.users != b.users:
            raise ValidationError("reports come from different scenarios and cannot be compared")

    mrt_lin = _levels(mrt_reports, mode)
    z3ro_lin = _levels(z3ro_reports, mode)
    mrt_db, z3ro_db = to_db(mrt_lin), to_db(z3ro_lin)
    mrt_db, z3ro_db = np.atleast_1d(mrt_db), np.atleast_1d(z3ro_db)
    with np.errstate(invalid="ignore"):
        gaps = mrt_db - z3ro_db
    # equal levels (including both -inf) count as no gap
    gaps = np.where(mrt_db == z3ro_db, 0.0, gaps)

    def pct(x):
        return float(np.percentile(x, TAIL_PERCENTILE, method="inverted_cdf"))

    def diff(a, b):
        return 0.0 if a == b else float(a - b)

    return ReductionStatistics(
        mean_db_gap=float(np.mean(gaps)),
        tail_db_gap=diff(pct(mrt_db), pct(z3ro_db)),
        max_db_gap=diff(float(np.max(mrt_db)), float(np.max(z3ro_db))),
        mean_power_db_gap=diff(to_db(np.mean(mrt_lin)), to_db(np.mean(z3ro_lin))),
        gaps=gaps,
        mrt_db=mrt_db,
        z3ro_db=z3ro_db,
    )
