"""Small parameter records used across modules."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class NoiseParams:
    """Uniform noise amplitudes of the device.

    Attributes
    ----------
    xi : float
        Pairwise overlap of the internal states, in (0, 1].
    eta : float
        Transmission amplitude; a boson survives with probability ``eta**2``.
    nu : float
        Poisson dark-count rate per detector.
    """

    xi: float = 1.0
    eta: float = 1.0
    nu: float = 0.0

    def __post_init__(self):
        for name in ("xi", "eta", "nu"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"{name} must be finite")
        if not 0.0 < self.xi <= 1.0:
            raise InvalidArgumentError(f"xi must lie in (0, 1], got {self.xi}")
        if not 0.0 < self.eta <= 1.0:
            raise InvalidArgumentError(f"eta must lie in (0, 1], got {self.eta}")
        if self.nu < 0.0:
            raise InvalidArgumentError(f"nu must be nonnegative, got {self.nu}")


@dataclass(frozen=True)
class CutoffPolicy:
    """Maximum cycle length ``k_max`` kept in the relative permutation, with overlap ``xi``."""

    k_max: int
    xi: float = 1.0

    def __post_init__(self):
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise InvalidArgumentError(f"cutoff k_max must be an integer >= 1, got {self.k_max}")
        if not (math.isfinite(self.xi) and 0.0 <= self.xi <= 1.0):
            raise InvalidArgumentError(f"xi must lie in [0, 1], got {self.xi}")


def check_xi(xi: float) -> float:
    xi = float(xi)
    if not (math.isfinite(xi) and 0.0 <= xi <= 1.0):
        raise InvalidArgumentError(f"xi must lie in [0, 1], got {xi}")
    return xi
