"""Memoryless power-amplifier models.

Every model maps complex baseband samples element-wise, so the same call works
on a scalar, an antenna vector or an ``N x M`` block of precoded symbols.
All models have unit small-signal gain unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ValidationError

__all__ = ["Rapp", "Polynomial3", "Ideal", "PaModel", "amplify", "small_signal_gain"]


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValidationError("amplifier input contains non-finite samples")


@dataclass(frozen=True)
class Rapp:
    r"""Rapp solid-state amplifier with zero AM/PM.

    .. math::

        y = \frac{x}{\left(1 + |x / \sqrt{p_\mathrm{sat}}|^{2S}\right)^{1/(2S)}}

    Parameters
    ----------
    saturation_power : float
        Output saturation power :math:`p_\mathrm{sat}` in watts.
    smoothness : float
        Transition smoothness :math:`S`; large values approach a hard clipper.
    """

    saturation_power: float = 1.0
    smoothness: float = 2.0

    def __post_init__(self):
        if not self.saturation_power > 0:
            raise ValidationError(f"saturation power must be > 0, got {self.saturation_power}")
        if not self.smoothness > 0:
            raise ValidationError(f"smoothness must be > 0, got {self.smoothness}")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.complex128)
        _check_finite(x)
        u = (x.real**2 + x.imag**2) / self.saturation_power
        s = self.smoothness
        if s == 2.0:
            # (1 + u^2)^(1/4) without the generic power kernel
            return x / np.sqrt(np.sqrt(1.0 + u * u))
        return x / (1.0 + u**s) ** (0.5 / s)

    @property
    def small_signal_gain(self) -> complex:
        return 1.0 + 0j


@dataclass(frozen=True)
class Polynomial3:
    """Third-order polynomial ``y = a1 x + a3 x |x|^2``."""

    linear_gain: complex = 1.0
    cubic_coeff: complex = -0.05

    def __post_init__(self):
        if self.linear_gain == 0:
            raise ValidationError("linear gain a1 must be non-zero")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.complex128)
        _check_finite(x)
        return x * (self.linear_gain + self.cubic_coeff * (x.real**2 + x.imag**2))

    @property
    def small_signal_gain(self) -> complex:
        return complex(self.linear_gain)


@dataclass(frozen=True)
class Ideal:
    """Linear pass-through."""

    def __call__(self, x):
        x = np.asarray(x, dtype=np.complex128)
        _check_finite(x)
        return x.copy()

    @property
    def small_signal_gain(self) -> complex:
        return 1.0 + 0j


PaModel = Union[Rapp, Polynomial3, Ideal]


def amplify(x, model: PaModel):
    """Apply ``model`` element-wise; scalars in, scalars out."""
    y = model(x)
    return y[()] if y.ndim == 0 else y


def small_signal_gain(model: PaModel) -> complex:
    """Derivative of the AM/AM characteristic at the origin."""
    return model.small_signal_gain
