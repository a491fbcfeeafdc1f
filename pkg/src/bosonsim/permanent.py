"""Matrix permanents and cycle-restricted permutation sums.

The exact permanent uses Glynn's formula walked in Gray-code order, so each
step updates the column sums with one row and costs ``O(n)``; the whole sum is
``O(n 2**n)`` with Kahan-compensated accumulation.  The cycle-restricted sum
is a dynamic program over subsets: the permutations whose cycles are all no
longer than ``k_max`` are built cycle by cycle, each new cycle passing through
the smallest vertex not yet covered.
"""

from __future__ import annotations

import itertools
import math

import numba as nb
import numpy as np

from .errors import InvalidArgumentError, SizeLimitError
from .interferometer import make_rng
from .params import CutoffPolicy, check_xi

MAX_EXACT_N = 30
MAX_BRUTEFORCE_N = 10
MAX_CYCLE_DP_N = 24
# path-DP tables above this many bytes fall back to depth-first cycle enumeration
_DP_TABLE_BYTES = 1 << 28


def as_square(a, name="a") -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidArgumentError(f"{name} must be a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return a


# ---------------------------------------------------------------------------
# kernels


@nb.njit(cache=True)
def _ctz(x):
    c = 0
    while (x & 1) == 0:
        x >>= 1
        c += 1
    return c


@nb.njit(cache=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@nb.njit(cache=True)
def glynn_gray(a):
    """Glynn permanent in Gray-code order; a 0x0 matrix has permanent 1."""
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n == 1:
        return a[0, 0]
    colsum = np.empty(n, dtype=np.complex128)
    for j in range(n):
        s = 0.0j
        for i in range(n):
            s += a[i, j]
        colsum[j] = s
    p = 1.0 + 0.0j
    for j in range(n):
        p *= colsum[j]
    total = p
    comp = 0.0j
    sign = 1.0
    gray = 0
    for step in range(1, 1 << (n - 1)):
        b = _ctz(step)
        row = b + 1
        if (gray >> b) & 1:
            for j in range(n):
                colsum[j] += 2.0 * a[row, j]
        else:
            for j in range(n):
                colsum[j] -= 2.0 * a[row, j]
        gray ^= 1 << b
        sign = -sign
        p = 1.0 + 0.0j
        for j in range(n):
            p *= colsum[j]
        y = sign * p - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total / (1 << (n - 1))


@nb.njit(cache=True)
def _cycle_weights_dfs(a, k_max, xipow, cw):
    # cw[T] += weight of every directed cycle on vertex set T through min(T)
    n = a.shape[0]
    path = np.empty(n, dtype=np.int64)
    prods = np.empty(n, dtype=np.complex128)
    cand = np.empty(n, dtype=np.int64)
    for s in range(n):
        cw[1 << s] += a[s, s]
        if k_max < 2:
            continue
        depth = 0
        path[0] = s
        prods[0] = 1.0 + 0.0j
        cand[0] = s + 1
        mask = 1 << s
        while depth >= 0:
            if cand[depth] >= n:
                if depth > 0:
                    mask ^= 1 << path[depth]
                depth -= 1
                continue
            w = cand[depth]
            cand[depth] += 1
            if (mask >> w) & 1:
                continue
            p = prods[depth] * a[path[depth], w]
            length = depth + 2
            cw[mask | (1 << w)] += xipow[length] * p * a[w, s]
            if length < k_max:
                depth += 1
                path[depth] = w
                prods[depth] = p
                cand[depth] = s + 1
                mask |= 1 << w


@nb.njit(cache=True)
def _cycle_weights_dp(a, k_max, xipow, cw):
    # same contract as _cycle_weights_dfs, via a path table over subsets of the
    # vertices above the start
    n = a.shape[0]
    for s in range(n):
        cw[1 << s] += a[s, s]
        r = n - 1 - s
        if k_max < 2 or r == 0:
            continue
        paths = np.zeros((1 << r, r), dtype=np.complex128)
        for j in range(r):
            paths[1 << j, j] = a[s, s + 1 + j]
        for sub in range(1, 1 << r):
            pc = _popcount(sub)
            if pc > k_max - 1:
                continue
            full = (sub << (s + 1)) | (1 << s)
            for v in range(r):
                val = paths[sub, v]
                if val == 0:
                    continue
                cw[full] += xipow[pc + 1] * val * a[s + 1 + v, s]
                if pc < k_max - 1:
                    for w in range(r):
                        if not (sub >> w) & 1:
                            paths[sub | (1 << w), w] += val * a[s + 1 + v, s + 1 + w]


@nb.njit(cache=True)
def _cycle_cover_sum(cw, n, k_max):
    f = np.zeros(1 << n, dtype=np.complex128)
    f[0] = 1.0
    bits = np.empty(n, dtype=np.int64)
    idx = np.empty(n, dtype=np.int64)
    for S in range(1, 1 << n):
        s = _ctz(S)
        low = 1 << s
        rest = S ^ low
        r = 0
        x = rest
        while x:
            b = _ctz(x)
            bits[r] = b
            r += 1
            x &= x - 1
        total = 0.0j
        if k_max - 1 >= r:
            sub = rest
            while True:
                c = cw[sub | low]
                if c != 0:
                    total += c * f[rest ^ sub]
                if sub == 0:
                    break
                sub = (sub - 1) & rest
        else:
            for j in range(k_max):
                # all j-subsets of the bits of rest
                for t in range(j):
                    idx[t] = t
                while True:
                    sub = 0
                    for t in range(j):
                        sub |= 1 << bits[idx[t]]
                    c = cw[sub | low]
                    if c != 0:
                        total += c * f[rest ^ sub]
                    t = j - 1
                    while t >= 0 and idx[t] == r - j + t:
                        t -= 1
                    if t < 0:
                        break
                    idx[t] += 1
                    for u in range(t + 1, j):
                        idx[u] = idx[u - 1] + 1
        f[S] = total
    return f[(1 << n) - 1]


# ---------------------------------------------------------------------------
# public API


def permanent_exact(a, max_n: int = MAX_EXACT_N) -> complex:
    """Permanent by Gray-code Glynn in ``O(n 2**n)``.

    Raises
    ------
    SizeLimitError
        If ``n > max_n``; use :func:`glynn_estimate` for larger matrices.
    """
    a = as_square(a)
    n = a.shape[0]
    if n > max_n:
        raise SizeLimitError(f"exact permanent capped at n={max_n} (got {n}); use glynn_estimate instead")
    return complex(glynn_gray(np.ascontiguousarray(a)))


def _iter_permutation_chunks(n, chunk=100_000):
    it = itertools.permutations(range(n))
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def permanent_bruteforce(a) -> complex:
    """Direct sum over all ``n!`` permutations (test oracle, ``n <= 10``)."""
    return _bruteforce_sum(as_square(a), lambda perms: 1.0)


def _bruteforce_sum(a, weight) -> complex:
    n = a.shape[0]
    if n > MAX_BRUTEFORCE_N:
        raise SizeLimitError(f"brute-force permutation sums are capped at n={MAX_BRUTEFORCE_N}")
    rows = np.arange(n)
    total = 0j
    for perms in _iter_permutation_chunks(n):
        terms = np.prod(a[rows, perms], axis=1) * weight(perms)
        total += terms.sum()
    return complex(total)


def fixed_points(perms: np.ndarray) -> np.ndarray:
    """Number of fixed points of each row of a permutation array."""
    perms = np.atleast_2d(perms)
    return (perms == np.arange(perms.shape[1])).sum(axis=1)


def cycle_lengths(perm) -> list[int]:
    perm = list(perm)
    seen = [False] * len(perm)
    out = []
    for i in range(len(perm)):
        if seen[i]:
            continue
        length, j = 0, i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        out.append(length)
    return out


def weighted_perm_bruteforce(a, xi: float) -> complex:
    """``sum_pi xi**(n - fixed(pi)) prod_i a[i, pi(i)]`` by enumeration, with ``0**0 = 1``."""
    a = as_square(a)
    xi = check_xi(xi)
    n = a.shape[0]
    return _bruteforce_sum(a, lambda perms: np.power(xi, n - fixed_points(perms)))


def xi_rescale(a, xi: float) -> np.ndarray:
    """Copy of ``a`` with off-diagonal entries multiplied by ``xi``."""
    a = as_square(a)
    xi = check_xi(xi)
    out = a * xi
    np.fill_diagonal(out, np.diagonal(a))
    return out


def weighted_perm_sum(a, xi: float, max_n: int = MAX_EXACT_N) -> complex:
    """Permutation sum weighting each non-fixed point by ``xi``, as ``per(xi_rescale(a, xi))``."""
    return permanent_exact(xi_rescale(a, xi), max_n=max_n)


def _xi_powers(xi, n):
    # 0**0 = 1
    return np.array([xi**k if k else 1.0 for k in range(n + 2)], dtype=np.float64)


def cycle_weight_table(a, k_max: int, xi: float, method: str = "auto") -> np.ndarray:
    """Dense table over vertex subsets ``T`` of the summed weights of directed cycles covering ``T``.

    Only cycles through ``min(T)`` are counted, once per orientation; a cycle of
    length ``l >= 2`` carries the factor ``xi**l``.
    """
    a = np.ascontiguousarray(as_square(a))
    n = a.shape[0]
    k = min(int(k_max), n)
    cw = np.zeros(1 << n, dtype=np.complex128)
    xipow = _xi_powers(xi, n)
    if method == "auto":
        dfs_work = sum(math.perm(n - 1, j) for j in range(k))
        dp_bytes = (1 << max(n - 1, 0)) * max(n - 1, 1) * 16
        dp_work = (1 << n) * n * n
        method = "dp" if dp_bytes <= _DP_TABLE_BYTES and dp_work < dfs_work else "dfs"
    if method == "dp":
        _cycle_weights_dp(a, k, xipow, cw)
    elif method == "dfs":
        _cycle_weights_dfs(a, k, xipow, cw)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    return cw


def cycle_restricted_sum(a, policy: CutoffPolicy, method: str = "auto") -> complex:
    """``sum_pi xi**(n - fixed(pi)) prod_i a[i, pi(i)]`` over permutations whose cycles are all ``<= k_max`` long.

    ``method`` selects how cycle weights are tabulated (``"dfs"``, ``"dp"`` or
    ``"auto"``); the cover sum is a subset DP with ``2**n`` states.
    """
    if not isinstance(policy, CutoffPolicy):
        raise InvalidArgumentError("policy must be a CutoffPolicy")
    a = as_square(a)
    n = a.shape[0]
    if n > MAX_CYCLE_DP_N:
        raise SizeLimitError(f"cycle-restricted sums are capped at n={MAX_CYCLE_DP_N} (got {n})")
    k = min(policy.k_max, n)
    cw = cycle_weight_table(a, k, policy.xi, method)
    return complex(_cycle_cover_sum(cw, n, k))


def cycle_restricted_bruteforce(a, policy: CutoffPolicy) -> complex:
    """Enumeration oracle for :func:`cycle_restricted_sum` (``n <= 10``)."""
    a = as_square(a)
    n = a.shape[0]
    k, xi = policy.k_max, policy.xi

    def weight(perms):
        ok = np.array([max(cycle_lengths(p)) <= k for p in perms])
        return np.where(ok, np.power(xi, n - fixed_points(perms)), 0.0)

    return _bruteforce_sum(a, weight)


def glynn_estimate(a, trials: int, seed: int, chunk: int = 1 << 16) -> tuple[complex, float]:
    """Randomized Glynn estimator with a jackknife standard error.

    Each trial draws a uniform sign vector ``x`` and evaluates
    ``prod_j x_j * prod_i (a @ x)_i``, whose mean is ``per(a)``.
    """
    a = as_square(a)
    if int(trials) != trials or trials < 2:
        raise InvalidArgumentError(f"trials must be an integer >= 2, got {trials}")
    trials = int(trials)
    rng = make_rng(seed)
    n = a.shape[0]
    samples = np.empty(trials, dtype=np.complex128)
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        x = rng.integers(0, 2, size=(stop - start, n)) * 2.0 - 1.0
        samples[start:stop] = np.prod(x @ a.T, axis=1) * np.prod(x, axis=1)
    estimate = samples.mean()
    # leave-one-out means
    loo = (samples.sum() - samples) / (trials - 1)
    se = math.sqrt((trials - 1) / trials * float(np.sum(np.abs(loo - loo.mean()) ** 2)))
    return complex(estimate), se
