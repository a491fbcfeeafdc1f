"""
The no-click gap
================

Probability that no boson reaches port 1, exactly and after truncating to
short cycles, for a Haar interferometer and a balanced-port one.
"""

import numpy as np

from bosonsim import CutoffPolicy, InputSpec, NoiseParams, balanced_port, haar_random
from bosonsim.bounds import w1_bound
from bosonsim.probability import delta_p1, subset_probability, truncated_subset_probability

n = m = 8
inp = InputSpec(n, m)
omega = list(range(1, m))  # every port except the first

u = haar_random(m, seed=1)
p1 = subset_probability(u, inp, omega, xi=1.0).value
print("P1 exact", p1)
for k in (1, 2, 3, 8):
    print("K =", k, "P1^(K) =", truncated_subset_probability(u, inp, omega, CutoffPolicy(k, 1.0)).value)

# %%
# average over Haar instances and compare with the closed form
gaps = np.array([delta_p1(haar_random(m, s), inp, CutoffPolicy(1, 1.0)) for s in range(200)])
w1 = w1_bound(NoiseParams(), rho=n / m, k=1)
print("mean dP1 %.4f +- %.4f, W1 %.4f" % (gaps.mean(), gaps.std(ddof=1) / np.sqrt(gaps.size), w1))

# %%
# a balanced first column fixes the gap without any averaging
v = balanced_port(haar_random(m - 1, seed=3))
print("balanced dP1", delta_p1(v, inp, CutoffPolicy(1, 1.0)))
