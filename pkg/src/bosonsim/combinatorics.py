"""Cycle-index counts of the symmetric group, exact and asymptotic.

Counts and ratios are exact (``int`` / ``fractions.Fraction``).  Floating
point appears only in the asymptotic majorants, which drop their ``1 + o(1)``
prefactor and therefore bound the exact fractions only once the exponent
dominates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import InvalidArgumentError

E_MINUS_1 = math.e - 1.0


def _nonneg(n, name="n") -> int:
    if int(n) != n or n < 0:
        raise InvalidArgumentError(f"{name} must be a nonnegative integer, got {n}")
    return int(n)


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12) if x != int(x) else Fraction(int(x))
    return Fraction(x)


def cycle_sum(n: int, weights: Sequence) -> Fraction:
    """Cycle index ``Z_n(t_1, ..., t_n) = sum_sigma prod_k t_k**C_k(sigma)``.

    Uses ``Z_n = sum_k (n-1)!/(n-k)! t_k Z_{n-k}`` with ``Z_0 = 1``.  Missing
    weights beyond ``len(weights)`` count as zero.
    """
    n = _nonneg(n)
    t = [_as_fraction(w) for w in weights] + [Fraction(0)] * max(0, n - len(weights))
    if all(w.denominator == 1 for w in t):
        # integer recurrence is much faster than Fraction arithmetic
        t = [int(w) for w in t]
    z = [1]
    for size in range(1, n + 1):
        acc = 0
        falling = 1  # (size-1)!/(size-k)!
        for k in range(1, size + 1):
            if t[k - 1]:
                acc += falling * t[k - 1] * z[size - k]
            falling *= size - k
        z.append(acc)
    return Fraction(z[n])


def log_fraction(x: Fraction) -> float:
    """Natural log of a positive rational without converting it to a float."""
    x = Fraction(x)
    if x <= 0:
        raise InvalidArgumentError("log of a nonpositive number")
    return math.log(x.numerator) - math.log(x.denominator)


def cycle_type(perm: Sequence[int]) -> tuple[int, ...]:
    """``(C_1, ..., C_n)`` for a permutation given as images of ``0..n-1``."""
    n = len(perm)
    counts = [0] * n
    seen = [False] * n
    for i in range(n):
        if seen[i]:
            continue
        length, j = 0, i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        counts[length - 1] += 1
    return tuple(counts)


def class_size(counts: Sequence[int]) -> int:
    """Number of permutations with cycle type ``counts``: ``n! / prod k**C_k C_k!``."""
    n = sum((k + 1) * c for k, c in enumerate(counts))
    denom = 1
    for k, c in enumerate(counts, start=1):
        denom *= k**c * math.factorial(c)
    return math.factorial(n) // denom


def count_restricted(n: int, k: int) -> int:
    """Permutations of ``n`` objects whose cycles are all at most ``k`` long."""
    n = _nonneg(n)
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    k = min(int(k), max(n, 1))
    return int(cycle_sum(n, [1] * k))


def fraction_exact(n: int, k: int) -> Fraction:
    """``count_restricted(n, k) / n!``; use ``float()`` for a rendering."""
    return Fraction(count_restricted(n, k), math.factorial(_nonneg(n)))


def derangements(s: int) -> int:
    """``d_s = s! sum_j (-1)**j / j!``."""
    s = _nonneg(s, "s")
    total = sum(Fraction((-1) ** j, math.factorial(j)) for j in range(s + 1))
    return int(total * math.factorial(s))


def count_near_identity(n: int, k: int) -> int:
    """Permutations with at least ``n - k`` fixed points: ``sum_{s<=k} C(n, s) d_s``."""
    n = _nonneg(n)
    k = _nonneg(k, "k")
    return sum(math.comb(n, s) * derangements(s) for s in range(min(k, n) + 1))


def _check_xi(xi) -> Fraction:
    xi = _as_fraction(xi)
    if not 0 < xi <= 1:
        raise InvalidArgumentError(f"xi must lie in (0, 1], got {xi}")
    return xi


def weighted_cycle_sum(n: int, xi) -> Fraction:
    """``sum_pi xi**(n - fixed(pi)) = xi**n n! sum_{j<=n} (1/xi - 1)**j / j!``."""
    n = _nonneg(n)
    xi = _check_xi(xi)
    r = 1 / xi - 1
    return xi**n * math.factorial(n) * sum(r**j / math.factorial(j) for j in range(n + 1))


def weighted_restricted_sum(n: int, k: int, xi) -> Fraction:
    """Weighted sum over permutations with cycles at most ``k`` long."""
    n = _nonneg(n)
    xi = _check_xi(xi)
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    k = min(int(k), max(n, 1))
    return xi**n * cycle_sum(n, [1 / xi] + [1] * (k - 1))


# ---------------------------------------------------------------------------
# asymptotics


def stirling_remainder_lower(n: int) -> float:
    """Lower bound ``1/(12n + 1)`` on ``r_n`` in ``n! = sqrt(2 pi n) (n/e)**n e**r_n``."""
    n = _nonneg(n)
    return 1.0 / (12 * n + 1)


def stirling_remainder(n: int) -> float:
    """Exact ``r_n = ln n! - ln(sqrt(2 pi n) (n/e)**n)``."""
    n = _nonneg(n)
    return math.lgamma(n + 1) - 0.5 * math.log(2 * math.pi * n) - n * (math.log(n) - 1)


def r_nk(n: int, k: int) -> float:
    """The exponent ``R_{N,K}`` of the restricted-cycle saddle-point formula (``k >= 2``)."""
    if k < 2:
        raise InvalidArgumentError("R_{N,K} is defined for K >= 2")
    total = 0.0
    for s in range(1, k):
        rising = 1.0
        for j in range(1, s):
            rising *= s / k + j
        total += rising / (math.factorial(s) * math.factorial(k - s)) * n ** ((k - s) / k)
    return total - sum(1.0 / s for s in range(2, k + 1)) / k


def r_nk_upper(n: int, k: int) -> tuple[float, float]:
    """The two successive upper bounds on ``R_{N,K}``: the factorial sum and ``(e-1) N**((K-1)/K)``."""
    mid = sum(n ** ((k - s) / k) / math.factorial(k - s) for s in range(1, k))
    return mid, E_MINUS_1 * n ** ((k - 1) / k)


def fraction_asymptotic(n: int, k: int) -> float:
    """Saddle-point asymptotic for ``count_restricted(n, k) / n!`` without the ``1 + o(1)`` factor (``k >= 2``)."""
    log_val = -math.lgamma(n + 1) / k - (k - 1) / (2 * k) * math.log(2 * math.pi * n) + r_nk(n, k) - 0.5 * math.log(k)
    return math.exp(log_val)


@dataclass(frozen=True)
class AsymptoticBound:
    """An asymptotic majorant with the ``1 + o(1)`` prefactor suppressed."""

    value: float
    log_value: float
    bracket: float
    vacuous: bool
    label: str = "asymptotic majorant, prefactor suppressed"

    def dominates(self, exact) -> bool:
        """``exact <= value``, compared in log space so underflow cannot flip it."""
        exact = Fraction(exact)
        return exact <= 0 or log_fraction(exact) <= self.log_value


def _majorant(n, k, log_inv_xi=0.0) -> AsymptoticBound:
    n = _nonneg(n)
    if n < 1 or int(k) != k or k < 1:
        raise InvalidArgumentError("need n >= 1 and integer k >= 1")
    bracket = (math.log(n) - 1.0) / k - E_MINUS_1 / n ** (1.0 / k) - log_inv_xi
    log_val = -0.5 * math.log(2 * math.pi * n) - n * bracket
    value = math.exp(log_val) if log_val < 700 else math.inf
    return AsymptoticBound(value, log_val, bracket, bracket < 0)


def fraction_asymptotic_bound(n: int, k: int) -> AsymptoticBound:
    """``(2 pi N)**-0.5 exp(-N[(ln N - 1)/K - (e-1)/N**(1/K)])``.

    ``vacuous`` flags a negative bracket, where the majorant grows with ``N``.
    """
    return _majorant(n, k)


@dataclass(frozen=True)
class WeightedFractionBound:
    exact_ratio: Optional[Fraction]
    intermediate: Fraction
    majorant: AsymptoticBound


def weighted_fraction_bound(n: int, k: int, xi, exact_limit: int = 400) -> WeightedFractionBound:
    """Bounds on the weighted share of permutations with cycles at most ``k`` long.

    ``intermediate`` is ``fraction_exact(n, k) / xi**n``; ``majorant`` adds
    ``ln(1/xi)`` to the unweighted bracket.  ``exact_ratio`` is computed for
    ``n <= exact_limit``.
    """
    xi = _check_xi(xi)
    exact = None
    if n <= exact_limit:
        exact = weighted_restricted_sum(n, k, xi) / weighted_cycle_sum(n, xi)
    inter = fraction_exact(n, k) / xi**n
    return WeightedFractionBound(exact, inter, _majorant(n, k, math.log(1 / float(xi))))
