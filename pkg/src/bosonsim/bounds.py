"""Closed-form distinguishing gap, its Haar spread, and run-budget planning."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

from .errors import BudgetOverflowError, InvalidArgumentError
from .params import NoiseParams

DEFAULT_SIGMAS = 5.0
MAX_BUDGET = 2**63 - 1


class Regime(str, enum.Enum):
    NO_COLLISION = "NoCollision"
    STRONG_COLLISION = "StrongCollision"
    INTERMEDIATE = "Intermediate"


def _check_rho(rho):
    if not (math.isfinite(rho) and 0.0 < rho <= 1.0):
        raise InvalidArgumentError(f"rho must lie in (0, 1], got {rho}")


def _check_k(k):
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"K must be an integer >= 1, got {k}")


def w1_bound(noise: NoiseParams, rho: float, k: int) -> float:
    """Haar-average gap ``(xi eta rho)**(K+1) / (1 + xi eta rho) * exp(-1 - nu - eta rho)``."""
    _check_rho(rho)
    _check_k(k)
    x = noise.xi * noise.eta * rho
    return x ** (k + 1) / (1.0 + x) * math.exp(-1.0 - noise.nu - noise.eta * rho)


def relative_variance(rho: float, k: int, n: int) -> float:
    """Predicted Haar variance of the gap in units of ``w1**2``: ``(1 - rho)(K + 1)**2 / N``."""
    _check_rho(rho)
    _check_k(k)
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"N must be a positive integer, got {n}")
    return (1.0 - rho) * (k + 1) ** 2 / n


def classify_regime(rho: float, n: int) -> Regime:
    """Advisory label: dense (``rho > 0.2``) before sparse (``rho < 2/sqrt(N)``)."""
    if rho > 0.2:
        return Regime.STRONG_COLLISION
    if rho < 2.0 / math.sqrt(n):
        return Regime.NO_COLLISION
    return Regime.INTERMEDIATE


def sample_budget(noise: NoiseParams, rho: float, k: int, n: int, target_sigmas: float = DEFAULT_SIGMAS) -> int:
    """Smallest run count ``T`` with ``target_sigmas / sqrt(T) <= w1 / 2``."""
    if not (math.isfinite(target_sigmas) and target_sigmas > 0):
        raise InvalidArgumentError(f"target_sigmas must be positive, got {target_sigmas}")
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"N must be a positive integer, got {n}")
    w1 = w1_bound(noise, rho, k)
    if w1 <= 0.0 or not math.isfinite(w1):
        raise BudgetOverflowError(f"w1 bound underflowed to {w1!r} (xi={noise.xi}, eta={noise.eta}, rho={rho}, K={k})")
    ratio = 2.0 * target_sigmas / w1
    if ratio * ratio >= MAX_BUDGET:
        raise BudgetOverflowError(f"required budget (2*{target_sigmas}/{w1:.3e})**2 exceeds {MAX_BUDGET}")
    budget = max(1, math.ceil(ratio * ratio))
    # guard the float ceiling against a one-off rounding miss
    while target_sigmas / math.sqrt(budget) > w1 / 2.0:
        budget += 1
    return budget


@dataclass(frozen=True)
class BoundReport:
    w1: float
    relative_variance: float
    regime: Regime
    sample_budget: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


def bound_report(noise: NoiseParams, rho: float, k: int, n: int, target_sigmas: float = DEFAULT_SIGMAS) -> BoundReport:
    return BoundReport(
        w1=w1_bound(noise, rho, k),
        relative_variance=relative_variance(rho, k, n),
        regime=classify_regime(rho, n),
        sample_budget=sample_budget(noise, rho, k, n, target_sigmas),
    )
