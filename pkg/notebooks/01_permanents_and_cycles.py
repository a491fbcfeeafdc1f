"""
Permanents, overlaps and short cycles
=====================================

How the overlap xi reweights a permanent, and what is kept when only
short permutation cycles are allowed.
"""

import numpy as np

from bosonsim import CutoffPolicy
from bosonsim.combinatorics import count_restricted, fraction_exact
from bosonsim.permanent import (
    cycle_restricted_bruteforce,
    cycle_restricted_sum,
    permanent_exact,
    weighted_perm_sum,
    xi_rescale,
)

rng = np.random.default_rng(0)
a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))

# the plain permanent, from the Gray-code Glynn formula
print("per(a)          ", permanent_exact(a))

# every non-fixed point costs a factor xi, which is the same as scaling the off-diagonal
xi = 0.6
print("weighted sum    ", weighted_perm_sum(a, xi))
print("per(rescaled)   ", permanent_exact(xi_rescale(a, xi)))

# %%
# keep only permutations whose cycles are at most K long
for k in range(1, 7):
    pol = CutoffPolicy(k, xi)
    print(k, cycle_restricted_sum(a, pol), abs(cycle_restricted_sum(a, pol) - cycle_restricted_bruteforce(a, pol)))

# %%
# how many permutations survive the cutoff: the share falls off quickly with N
for n in (5, 10, 20, 40):
    print(n, count_restricted(n, 2), float(fraction_exact(n, 2)))
