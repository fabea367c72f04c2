"""Monte-Carlo Bussgang analysis of precoded, amplified Gaussian symbols.

The received signal at a location is split as ``r = G s_k + d`` where ``d`` is
uncorrelated with the user's symbol ``s_k``. Expectations are replaced by sample
means over a symbol ensemble, and the symbol power entering ``G = E(r s*)/p`` is
the ensemble's own sample power. With that choice the residual ``r - G s`` is
orthogonal to ``s`` within the sample and ``E|r|^2 = |G|^2 p + E|d|^2`` holds
exactly for the estimates, which keeps the distortion floor at round-off level
instead of at ``1/sqrt(N)`` of the signal power.

Noise never enters the simulation; ``noise_var`` is added analytically in the
SNDR denominators.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import ChannelSet
from .errors import InconsistencyError, SingularityError, ValidationError
from .pa import PaModel
from .precoding import PrecoderWeights

__all__ = [
    "SymbolEnsemble",
    "BussgangResult",
    "draw_symbols",
    "received_noiseless",
    "bussgang_gain",
    "distortion_variance",
    "bussgang_analysis",
    "sndr",
    "rate",
    "to_db",
]

MIN_RECOMMENDED_ENSEMBLE = 10_000
DEFAULT_CHUNK = 2048


@dataclass(frozen=True)
class SymbolEnsemble:
    """``N x K`` block of independent CN(0, p_k) user symbols."""

    symbols: np.ndarray
    per_user_power: tuple[float, ...]
    seed: int | tuple[int, ...]

    def __post_init__(self):
        s = np.array(self.symbols, dtype=np.complex128, copy=True)
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)

    @property
    def size(self) -> int:
        return self.symbols.shape[0]

    @property
    def user_count(self) -> int:
        return self.symbols.shape[1]

    @property
    def empirical_power(self) -> np.ndarray:
        s = self.symbols
        return np.mean(s.real**2 + s.imag**2, axis=0)


def draw_symbols(k: int, n: int, powers, seed) -> SymbolEnsemble:
    """Draw ``n`` i.i.d. circularly-symmetric Gaussian symbols for each of ``k`` users.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts; scans pass
    ``(master_seed, task_index)`` so every task owns an independent stream.
    """
    powers = np.broadcast_to(np.asarray(powers, dtype=np.float64), (k,))
    if k < 1 or n < 1:
        raise ValidationError(f"need K >= 1 and N >= 1, got K={k}, N={n}")
    if np.any(~(powers > 0)) or not np.all(np.isfinite(powers)):
        raise ValidationError(f"symbol powers must be positive, got {powers.tolist()}")
    if n < MIN_RECOMMENDED_ENSEMBLE:
        warnings.warn(
            f"ensemble size {n} is below {MIN_RECOMMENDED_ENSEMBLE}; estimates will be noisy",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 2 * k)).view(np.complex128)
    symbols = z * np.sqrt(powers / 2.0)
    if isinstance(seed, (list, np.ndarray)):
        seed = tuple(int(v) for v in seed)
    return SymbolEnsemble(symbols=symbols, per_user_power=tuple(powers.tolist()), seed=seed)


def _gains_matrix(channels) -> np.ndarray:
    if isinstance(channels, ChannelSet):
        return channels.gains
    h = np.asarray(channels, dtype=np.complex128)
    return h[:, None] if h.ndim == 1 else h


def _check_dims(h: np.ndarray, weights: PrecoderWeights, ensemble: SymbolEnsemble) -> None:
    if h.shape[0] != weights.antenna_count:
        raise ValidationError(
            f"channels have {h.shape[0]} antennas but weights have {weights.antenna_count}"
        )
    if ensemble.user_count != weights.user_count:
        raise ValidationError(
            f"ensemble has {ensemble.user_count} users but weights have {weights.user_count}"
        )


def _received_block(s, w_t, model, h):
    return model(s @ w_t) @ h


def received_noiseless(channels, weights: PrecoderWeights, model: PaModel, ensemble: SymbolEnsemble):
    """``r[n, l] = sum_m h[m, l] * PA(sum_k w[m, k] s[n, k])`` for every symbol and location."""
    h = _gains_matrix(channels)
    _check_dims(h, weights, ensemble)
    return _received_block(ensemble.symbols, weights.weights.T, model, h)


def bussgang_gain(received, symbols, power: float) -> complex:
    """Sample estimate of ``E(r s*) / p``."""
    r = np.asarray(received)
    s = np.asarray(symbols)
    if r.shape != s.shape:
        raise ValidationError(f"received {r.shape} and symbols {s.shape} differ in length")
    if r.size == 0:
        raise ValidationError("empty sample")
    if not power > 0:
        raise ValidationError(f"symbol power must be positive, got {power}")
    return complex(np.vdot(s, r) / r.size / power)


def _clamp(raw: float, signal_var: float, total_var: float, n: int) -> tuple[float, bool]:
    if raw >= 0:
        return raw, False
    tol = 10.0 / np.sqrt(n) * signal_var + 1e-12 * total_var
    if raw < -tol:
        raise InconsistencyError(
            f"distortion estimate {raw:.3e} is below -{tol:.3e}; gain and ensemble do not match"
        )
    return 0.0, True


def distortion_variance(received, gain: complex, power: float, noise_var: float = 0.0) -> float:
    """``E|r|^2 - |G|^2 p - noise_var``, clamped to zero within Monte-Carlo tolerance."""
    r = np.asarray(received)
    if r.size == 0:
        raise ValidationError("empty sample")
    total = float(np.mean(r.real**2 + r.imag**2))
    signal = abs(gain) ** 2 * power
    value, _ = _clamp(total - signal - noise_var, signal, total, r.size)
    return value


def sndr(signal_var: float, distortion_var: float, noise_var: float) -> float:
    """Signal to noise-plus-distortion ratio (linear)."""
    if noise_var < 0:
        raise ValidationError(f"noise variance must be >= 0, got {noise_var}")
    denom = distortion_var + noise_var
    if denom <= 0:
        raise SingularityError("distortion and noise are both zero; SNDR is unbounded")
    return signal_var / denom


def rate(sndr_linear) -> float:
    """Gaussian-distortion lower bound ``log2(1 + SNDR)`` in bits/symbol."""
    x = np.asarray(sndr_linear, dtype=np.float64)
    if np.any(x < 0):
        raise ValidationError("SNDR must be non-negative")
    out = np.log2(1.0 + x)
    return float(out) if out.ndim == 0 else out


def to_db(x):
    """``10 log10(x)``; zero maps to ``-inf`` without a warning."""
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(np.asarray(x, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BussgangResult:
    """Per-location, per-user Bussgang decomposition of one precoded ensemble.

    Attributes
    ----------
    gain : ndarray, shape (L, K)
        ``G[l, k] = E(r_l s_k*) / p_k``.
    distortion_var : ndarray, shape (L, K)
        ``E|d[l, k]|^2``; for ``K > 1`` it includes inter-user interference.
    signal_var : ndarray, shape (L, K)
        ``|G[l, k]|^2 p_k``.
    received_var : ndarray, shape (L,)
        ``E|r_l|^2`` (noiseless).
    total_distortion_var : ndarray, shape (L,)
        Power left after projecting ``r_l`` onto all user symbols jointly; the
        nonlinear distortion alone. Equals ``distortion_var[:, 0]`` when ``K = 1``.
    clamped : ndarray of bool, shape (L, K)
        Entries whose raw estimate was slightly negative and set to zero.
    """

    gain: np.ndarray
    distortion_var: np.ndarray
    signal_var: np.ndarray
    received_var: np.ndarray
    total_distortion_var: np.ndarray
    clamped: np.ndarray
    noise_var: float
    ensemble_size: int

    @property
    def clamp_count(self) -> int:
        return int(np.count_nonzero(self.clamped))

    def sndr(self, location: int, user: int, noise_var: float | None = None) -> float:
        nv = self.noise_var if noise_var is None else noise_var
        return sndr(self.signal_var[location, user], self.distortion_var[location, user], nv)


def bussgang_analysis(
    channels,
    weights: PrecoderWeights,
    model: PaModel,
    ensemble: SymbolEnsemble,
    noise_var: float = 0.0,
    chunk_size: int = DEFAULT_CHUNK,
) -> BussgangResult:
    """Stream the ensemble through precoder, amplifier and channels in chunks.

    Only first and second moments are accumulated, so memory stays at
    ``chunk_size x max(M, L)`` regardless of ``N``. Chunk sums are added in
    a fixed order, making the result independent of how tasks are scheduled.
    """
    if noise_var < 0:
        raise ValidationError(f"noise variance must be >= 0, got {noise_var}")
    h = _gains_matrix(channels)
    _check_dims(h, weights, ensemble)
    s_all = ensemble.symbols
    n, k = s_all.shape
    l = h.shape[1]
    w_t = weights.weights.T

    cross = np.zeros((k, l), dtype=np.complex128)  # sum_n conj(s[n, k]) r[n, l]
    energy = np.zeros(l)
    for start in range(0, n, chunk_size):
        s = s_all[start : start + chunk_size]
        r = _received_block(s, w_t, model, h)
        cross += s.conj().T @ r
        energy += np.sum(r.real**2 + r.imag**2, axis=0)

    cross /= n
    received_var = energy / n
    gram = (s_all.conj().T @ s_all) / n
    p_hat = gram.diagonal().real

    gain = (cross / p_hat[:, None]).T
    signal_var = np.abs(gain) ** 2 * p_hat[None, :]
    distortion = np.empty((l, k))
    clamped = np.zeros((l, k), dtype=bool)
    for li in range(l):
        for ki in range(k):
            distortion[li, ki], clamped[li, ki] = _clamp(
                received_var[li] - signal_var[li, ki], signal_var[li, ki], received_var[li], n
            )

    if k == 1:
        total = distortion[:, 0].copy()
    else:
        proj = np.linalg.solve(gram, cross)
        captured = np.einsum("kl,kl->l", cross.conj(), proj).real
        total = np.empty(l)
        for li in range(l):
            total[li], _ = _clamp(
                received_var[li] - captured[li], captured[li], received_var[li], n
            )

    return BussgangResult(
        gain=gain,
        distortion_var=distortion,
        signal_var=signal_var,
        received_var=received_var,
        total_distortion_var=total,
        clamped=clamped,
        noise_var=float(noise_var),
        ensemble_size=n,
    )
