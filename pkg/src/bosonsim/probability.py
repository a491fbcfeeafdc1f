"""Output, no-click and truncated probabilities of noisy boson sampling.

Conventions
-----------
* ``X[k, i] = U[input_k, l_i]`` is the ``N x N`` transfer matrix of a
  configuration whose occupied output ports, listed with multiplicity in
  ascending order, are ``l_1 <= ... <= l_N``.
* With uniform overlap ``xi`` the relative permutation ``pi`` of the two
  summations carries the weight ``xi**(N - fixed(pi))``.  Writing each
  internal-state overlap as ``xi + (1 - xi) * delta`` and expanding gives, for
  the exact law,

      p_m = (1/m!) sum_{T, R} (1-xi)**|T| xi**(N-|T|)
                     per(|X|**2 [R, T]) |per X[R', T']|**2,

  summed over equal-size row/column subsets (primes are complements).  All
  sub-permanents of one configuration are tabulated once, so a full
  enumeration costs ``O(C(2N, N) N)`` per configuration instead of ``(N!)**2``.
* The truncated law keeps only relative permutations with cycles no longer
  than ``K``; it is evaluated as ``(1/m!) sum_pi w(pi) per(X o X*[pi, :])``.
  Its total mass is exactly one (the full-port Gram matrix is the identity)
  but single entries can be negative.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numba as nb
import numpy as np
from scipy.stats import poisson

from .errors import InvalidArgumentError, SizeLimitError, ValidationError
from .interferometer import InputSpec, Interferometer
from .params import CutoffPolicy, NoiseParams, check_xi
from .permanent import (
    _ctz,
    cycle_restricted_sum,
    glynn_gray,
    permanent_exact,
    xi_rescale,
)

MAX_EXACT_BOSONS = 12
MAX_DOUBLE_SUM_BOSONS = 8
MAX_OUTCOMES = 2_000_000
MAX_LOSSY_BOSONS = 10


class ProbabilityKind(str, enum.Enum):
    EXACT = "exact"
    TRUNCATED = "truncated"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class ProbabilityValue:
    """A probability-like number tagged with how it was obtained.

    Truncated values are raw series cutoffs and need not lie in ``[0, 1]``.
    """

    value: float
    kind: ProbabilityKind = ProbabilityKind.EXACT
    cutoff: Optional[int] = None
    std_error: Optional[float] = None

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        d = {"value": self.value, "kind": self.kind.value}
        if self.cutoff is not None:
            d["cutoff"] = self.cutoff
        if self.std_error is not None:
            d["std_error"] = self.std_error
        return d


# ---------------------------------------------------------------------------
# configurations


def num_configurations(n: int, dim: int) -> int:
    return math.comb(dim + n - 1, n)


def configurations(n: int, dim: int) -> np.ndarray:
    """All occupation vectors of ``n`` bosons in ``dim`` ports.

    Rows are ordered lexicographically by the ascending port list
    ``(l_1, ..., l_n)``; this is the order used for inverse-CDF sampling.
    """
    count = num_configurations(n, dim)
    if count > MAX_OUTCOMES:
        raise SizeLimitError(f"{count} configurations exceed the enumeration cap {MAX_OUTCOMES}")
    out = np.zeros((count, dim), dtype=np.int64)
    for row, ports in enumerate(itertools.combinations_with_replacement(range(dim), n)):
        for p in ports:
            out[row, p] += 1
    return out


def occupied_ports(m) -> np.ndarray:
    """Ascending port list with multiplicity, e.g. ``(0, 2, 1) -> [1, 1, 2]``."""
    m = np.asarray(m, dtype=np.int64)
    return np.repeat(np.arange(m.size), m)


def _slots(configs: np.ndarray) -> np.ndarray:
    n = int(configs[0].sum()) if len(configs) else 0
    out = np.empty((len(configs), n), dtype=np.int64)
    for row, m in enumerate(configs):
        out[row] = occupied_ports(m)
    return out


def _inv_mfact(configs: np.ndarray) -> np.ndarray:
    lg = np.array([math.lgamma(v + 1.0) for v in range(int(configs.max(initial=0)) + 1)])
    return np.exp(-lg[configs].sum(axis=1))


def _check_config(m, inp: InputSpec, *, lossless=True) -> np.ndarray:
    m = np.asarray(m, dtype=np.int64)
    if m.ndim != 1 or m.size != inp.dim:
        raise ValidationError(f"configuration must have {inp.dim} entries, got shape {m.shape}")
    if np.any(m < 0):
        raise ValidationError("occupations must be nonnegative")
    if lossless and m.sum() != inp.n_bosons:
        raise ValidationError(f"configuration holds {m.sum()} bosons, expected N={inp.n_bosons}")
    return m


def _check_instance(u: Interferometer, inp: InputSpec):
    if u.dim != inp.dim:
        raise ValidationError(f"input spec is for {inp.dim} ports but interferometer has {u.dim}")


# ---------------------------------------------------------------------------
# kernels


@lru_cache(maxsize=None)
def _mask_tables(n):
    popc = np.array([bin(x).count("1") for x in range(1 << n)], dtype=np.int64)
    order = np.argsort(popc, kind="stable").astype(np.int64)
    starts = np.searchsorted(popc[order], np.arange(n + 2)).astype(np.int64)
    return popc, order, starts


@nb.njit(cache=True)
def _subpermanents(x, a2, popc, order, starts, perx, pera):
    # perx[R, T] = per x[R, T], pera[R, T] = per a2[R, T] for |R| = |T|
    n = x.shape[0]
    perx[0, 0] = 1.0
    pera[0, 0] = 1.0
    for T in range(1, 1 << n):
        t0 = _ctz(T)
        Tr = T ^ (1 << t0)
        c = popc[T]
        for idx in range(starts[c], starts[c + 1]):
            R = order[idx]
            sx = 0.0j
            sa = 0.0
            rr = R
            while rr:
                r = _ctz(rr)
                rr &= rr - 1
                Rr = R ^ (1 << r)
                sx += x[r, t0] * perx[Rr, Tr]
                sa += a2[r, t0] * pera[Rr, Tr]
            perx[R, T] = sx
            pera[R, T] = sa


@nb.njit(cache=True)
def _exact_probs(u_in, slots, xi, inv_mfact, popc, order, starts):
    n = u_in.shape[0]
    full = (1 << n) - 1
    coef = np.empty(n + 1)
    for t in range(n + 1):
        a = (1.0 - xi) ** t if t else 1.0
        b = xi ** (n - t) if n - t else 1.0
        coef[t] = a * b
    out = np.empty(slots.shape[0])
    x = np.empty((n, n), dtype=np.complex128)
    a2 = np.empty((n, n))
    perx = np.zeros((1 << n, 1 << n), dtype=np.complex128)
    pera = np.zeros((1 << n, 1 << n))
    for c in range(slots.shape[0]):
        for k in range(n):
            for i in range(n):
                z = u_in[k, slots[c, i]]
                x[k, i] = z
                a2[k, i] = z.real * z.real + z.imag * z.imag
        if coef[0] == 1.0:
            # indistinguishable limit needs only the full permanent
            p = glynn_gray(x)
            out[c] = (p.real * p.real + p.imag * p.imag) * inv_mfact[c]
            continue
        _subpermanents(x, a2, popc, order, starts, perx, pera)
        total = 0.0
        for T in range(1 << n):
            t = popc[T]
            if coef[t] == 0.0:
                continue
            Tc = full ^ T
            s = 0.0
            for idx in range(starts[t], starts[t + 1]):
                R = order[idx]
                z = perx[full ^ R, Tc]
                s += pera[R, T] * (z.real * z.real + z.imag * z.imag)
            total += coef[t] * s
        out[c] = total * inv_mfact[c]
    return out


@nb.njit(cache=True)
def _truncated_probs(u_in, slots, perms, weights, inv_mfact):
    n = u_in.shape[0]
    out = np.empty(slots.shape[0])
    x = np.empty((n, n), dtype=np.complex128)
    z = np.empty((n, n), dtype=np.complex128)
    for c in range(slots.shape[0]):
        for k in range(n):
            for i in range(n):
                x[k, i] = u_in[k, slots[c, i]]
        acc = 0.0
        for p in range(perms.shape[0]):
            for k in range(n):
                pk = perms[p, k]
                for i in range(n):
                    z[k, i] = x[k, i] * np.conj(x[pk, i])
            acc += weights[p] * glynn_gray(z).real
        out[c] = acc * inv_mfact[c]
    return out


@nb.njit(cache=True)
def _double_sum(amp, perms, xipow):
    n = perms.shape[1]
    total = 0.0j
    for s in range(perms.shape[0]):
        row = 0.0j
        for t in range(perms.shape[0]):
            agree = 0
            for i in range(n):
                if perms[s, i] == perms[t, i]:
                    agree += 1
            row += xipow[n - agree] * np.conj(amp[t])
        total += amp[s] * row
    return total


# ---------------------------------------------------------------------------
# permutations with bounded cycles


@lru_cache(maxsize=64)
def restricted_permutations(n: int, k_max: int) -> np.ndarray:
    """All permutations of ``range(n)`` whose cycles are at most ``k_max`` long, as rows ``pi[i]``."""
    out = []
    perm = [-1] * n

    def build(remaining):
        if not remaining:
            out.append(tuple(perm))
            return
        s = remaining[0]
        rest = remaining[1:]
        for length in range(1, min(k_max, len(remaining)) + 1):
            for others in itertools.permutations(rest, length - 1):
                cyc = (s,) + others
                for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                    perm[a] = b
                build([r for r in rest if r not in others])
        for r in remaining:
            perm[r] = -1

    build(list(range(n)))
    arr = np.array(out, dtype=np.int64).reshape(len(out), n)
    arr.setflags(write=False)
    return arr


def _perm_weights(perms: np.ndarray, xi: float) -> np.ndarray:
    n = perms.shape[1]
    moved = n - (perms == np.arange(n)).sum(axis=1)
    return np.array([xi**k if k else 1.0 for k in moved])


# ---------------------------------------------------------------------------
# output probabilities


def _rows(u: Interferometer, inp: InputSpec) -> np.ndarray:
    return np.ascontiguousarray(u.matrix[list(inp.input_ports), :])


def exact_probabilities(u: Interferometer, inp: InputSpec, xi: float, configs: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact ``p_m(xi)`` for every row of ``configs`` (default: all configurations)."""
    _check_instance(u, inp)
    xi = check_xi(xi)
    n = inp.n_bosons
    if n > MAX_EXACT_BOSONS:
        raise SizeLimitError(f"exact output probabilities are capped at N={MAX_EXACT_BOSONS}")
    if configs is None:
        configs = configurations(n, inp.dim)
    configs = np.atleast_2d(np.asarray(configs, dtype=np.int64))
    popc, order, starts = _mask_tables(n)
    return _exact_probs(_rows(u, inp), _slots(configs), xi, _inv_mfact(configs), popc, order, starts)


def truncated_probabilities(
    u: Interferometer,
    inp: InputSpec,
    policy: CutoffPolicy,
    configs: Optional[np.ndarray] = None,
    renormalize: bool = False,
) -> np.ndarray:
    """Raw cycle-truncated ``p_m^(K)`` for each configuration.

    With ``renormalize=True`` the values are divided by their sum over
    ``configs``; this is meaningful only for a full enumeration.
    """
    _check_instance(u, inp)
    n = inp.n_bosons
    if configs is None:
        configs = configurations(n, inp.dim)
    configs = np.atleast_2d(np.asarray(configs, dtype=np.int64))
    if policy.k_max >= n:
        vals = exact_probabilities(u, inp, policy.xi, configs)
    else:
        perms = restricted_permutations(n, policy.k_max)
        weights = _perm_weights(perms, policy.xi)
        keep = weights != 0.0
        vals = _truncated_probs(_rows(u, inp), _slots(configs), perms[keep], weights[keep], _inv_mfact(configs))
    if renormalize:
        vals = vals / vals.sum()
    return vals


def double_sum_probability(u: Interferometer, inp: InputSpec, m, xi: float) -> float:
    """Oracle: ``(1/m!) sum_sigma sum_tau xi**(N - agree(sigma, tau)) amp(sigma) conj(amp(tau))``.

    ``agree`` counts slots where the two permutations coincide, which equals
    the number of fixed points of the relative permutation.
    """
    _check_instance(u, inp)
    xi = check_xi(xi)
    m = _check_config(m, inp)
    n = inp.n_bosons
    if n > MAX_DOUBLE_SUM_BOSONS:
        raise SizeLimitError(f"double permutation sums are capped at N={MAX_DOUBLE_SUM_BOSONS}")
    x = _rows(u, inp)[:, occupied_ports(m)]
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    amp = np.prod(x[perms, np.arange(n)], axis=1)
    xipow = np.array([xi**k if k else 1.0 for k in range(n + 1)])
    mfact = math.prod(math.factorial(int(v)) for v in m)
    return float(_double_sum(amp, perms, xipow).real) / mfact


def output_probability(u: Interferometer, inp: InputSpec, m, xi: float) -> ProbabilityValue:
    """Exact probability of the output configuration ``m`` with overlap ``xi``."""
    m = _check_config(m, inp)
    val = exact_probabilities(u, inp, xi, m[None, :])[0]
    return ProbabilityValue(float(val), ProbabilityKind.EXACT)


def truncated_output_probability(u: Interferometer, inp: InputSpec, m, policy: CutoffPolicy) -> ProbabilityValue:
    m = _check_config(m, inp)
    val = truncated_probabilities(u, inp, policy, m[None, :])[0]
    return ProbabilityValue(float(val), ProbabilityKind.TRUNCATED, cutoff=policy.k_max)


# ---------------------------------------------------------------------------
# no-click (subset) probabilities


def _check_omega(omega, dim) -> list[int]:
    ports = sorted(set(int(p) for p in omega))
    if not ports:
        raise InvalidArgumentError("port subset must be nonempty")
    if ports[0] < 0 or ports[-1] >= dim:
        raise InvalidArgumentError(f"port subset must lie in 0..{dim - 1}")
    return ports


def gram_submatrix(u: Interferometer, inp: InputSpec, omega: Sequence[int]) -> np.ndarray:
    """``A[k, j] = sum_{l in omega} U[k, l] conj(U[j, l])`` over the occupied inputs."""
    _check_instance(u, inp)
    ports = _check_omega(omega, u.dim)
    rows = _rows(u, inp)[:, ports]
    return rows @ rows.conj().T


def subset_probability(u: Interferometer, inp: InputSpec, omega: Sequence[int], xi: float) -> ProbabilityValue:
    """Probability that every boson lands inside ``omega``: ``per(xi_rescale(A, xi))``."""
    a = gram_submatrix(u, inp, omega)
    return ProbabilityValue(permanent_exact(xi_rescale(a, xi)).real, ProbabilityKind.EXACT)


def truncated_subset_probability(u: Interferometer, inp: InputSpec, omega: Sequence[int], policy: CutoffPolicy) -> ProbabilityValue:
    a = gram_submatrix(u, inp, omega)
    return ProbabilityValue(cycle_restricted_sum(a, policy).real, ProbabilityKind.TRUNCATED, cutoff=policy.k_max)


def no_click_ports(dim: int, port: int = 0) -> list[int]:
    """Every port except ``port``."""
    return [p for p in range(dim) if p != port]


def delta_p1(u: Interferometer, inp: InputSpec, policy: CutoffPolicy, port: int = 0) -> float:
    """``P_1 - P_1^(K)`` for no boson in ``port`` (by default the first port)."""
    omega = no_click_ports(u.dim, port)
    exact = subset_probability(u, inp, omega, policy.xi).value
    trunc = truncated_subset_probability(u, inp, omega, policy).value
    return exact - trunc


@dataclass(frozen=True, eq=False)
class TVResult:
    """Exact and truncated laws over a full enumeration, with their distance."""

    distance: float
    delta_p1: float
    best_gap: float
    best_subset: np.ndarray  # boolean mask over `configurations`
    configurations: np.ndarray
    p: np.ndarray
    p_truncated: np.ndarray

    def subset_gap(self, mask) -> float:
        """``P_Omega - P_Omega^(K)`` for a boolean mask over configurations."""
        return float((self.p - self.p_truncated)[np.asarray(mask, dtype=bool)].sum())


def tv_distance_exact(u: Interferometer, inp: InputSpec, policy: CutoffPolicy) -> TVResult:
    """Total variation distance between the exact and the raw truncated laws.

    The raw truncated law sums to one, so the positive and negative parts of
    the difference balance and the sign-split set attains the distance.
    """
    configs = configurations(inp.n_bosons, inp.dim)
    p = exact_probabilities(u, inp, policy.xi, configs)
    q = truncated_probabilities(u, inp, policy, configs)
    diff = p - q
    pos = diff > 0
    gap_pos = float(diff[pos].sum())
    gap_neg = float(-diff[~pos].sum())
    return TVResult(
        distance=0.5 * float(np.abs(diff).sum()),
        delta_p1=float(diff[configs[:, 0] == 0].sum()),
        best_gap=max(gap_pos, gap_neg),
        best_subset=pos if gap_pos >= gap_neg else ~pos,
        configurations=configs,
        p=p,
        p_truncated=q,
    )


# ---------------------------------------------------------------------------
# losses and dark counts


def _sub_configs(m: np.ndarray, total: int):
    ranges = [range(int(v) + 1) for v in m]
    for combo in itertools.product(*ranges):
        if sum(combo) == total:
            yield combo


def lossy_dark_probability(u: Interferometer, inp: InputSpec, m, noise: NoiseParams) -> ProbabilityValue:
    """Probability of detector counts ``m`` with transmission ``eta`` and Poisson dark counts ``nu``.

    Each boson survives independently with probability ``eta**2``; the
    survivors interfere with overlap ``xi``; each port then adds an
    independent Poisson(``nu``) number of dark counts.
    """
    _check_instance(u, inp)
    m = _check_config(m, inp, lossless=False)
    n = inp.n_bosons
    if n > MAX_LOSSY_BOSONS:
        raise SizeLimitError(f"lossy probabilities are capped at N={MAX_LOSSY_BOSONS}")
    t = noise.eta**2
    total = 0.0
    for s in range(0, min(n, int(m.sum())) + 1):
        weight = t**s * (1.0 - t) ** (n - s)
        if weight == 0.0:
            continue
        subs = np.array(list(_sub_configs(m, s)), dtype=np.int64).reshape(-1, inp.dim)
        if len(subs) == 0:
            continue
        dark = np.prod(poisson.pmf(m[None, :] - subs, noise.nu), axis=1)
        if not np.any(dark):
            continue
        for survivors in itertools.combinations(inp.input_ports, s):
            if s == 0:
                boson = np.ones(1)
            else:
                sub_inp = InputSpec(s, inp.dim, survivors)
                boson = exact_probabilities(u, sub_inp, noise.xi, subs)
            total += weight * float(np.dot(boson, dark))
    return ProbabilityValue(total, ProbabilityKind.EXACT)


def lossy_subset_probability(u: Interferometer, inp: InputSpec, omega: Sequence[int], noise: NoiseParams) -> ProbabilityValue:
    """No counts outside ``omega`` with losses and dark counts.

    Survivor subsets are summed with binomial weights; each needs the no-click
    permanent of its own Gram matrix, and every port outside ``omega`` must
    also stay dark, a factor ``exp(-nu)`` per port.
    """
    _check_instance(u, inp)
    ports = _check_omega(omega, u.dim)
    n = inp.n_bosons
    if n > MAX_LOSSY_BOSONS:
        raise SizeLimitError(f"lossy probabilities are capped at N={MAX_LOSSY_BOSONS}")
    t = noise.eta**2
    total = 0.0
    for s in range(n + 1):
        weight = t**s * (1.0 - t) ** (n - s)
        if weight == 0.0:
            continue
        for survivors in itertools.combinations(inp.input_ports, s):
            if s == 0:
                total += weight
                continue
            sub = InputSpec(s, inp.dim, survivors)
            total += weight * subset_probability(u, sub, ports, noise.xi).value
    dark = math.exp(-noise.nu * (u.dim - len(ports)))
    return ProbabilityValue(total * dark, ProbabilityKind.EXACT)
