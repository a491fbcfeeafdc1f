"""
Telling the truncated simulator apart
=====================================

Draw records from the exact model and from a short-cycle simulator, then
test the no-click frequency at port 1.
"""

from bosonsim import CutoffPolicy, InputSpec, NoiseParams, haar_random
from bosonsim.bounds import bound_report
from bosonsim.samplers import distinguish, estimate_subset_probability, sample_exact, sample_truncated

u = haar_random(8, seed=1)
inp = InputSpec(8, 8)
noise = NoiseParams(xi=0.9)
omega = list(range(1, 8))

report = bound_report(noise, rho=1.0, k=1, n=8, target_sigmas=5)
print(report)

exact = sample_exact(u, inp, noise, report.sample_budget, seed=10)
trunc = sample_truncated(u, inp, CutoffPolicy(1, noise.xi), report.sample_budget, seed=11)
print("exact     ", estimate_subset_probability(exact, omega))
print("truncated ", estimate_subset_probability(trunc, omega))

res = distinguish(exact, trunc, omega, threshold_sigmas=5)
print(res.verdict.value, "z = %.1f" % res.z_score)

# %%
# with the cutoff at N the two laws coincide and the test stays quiet
same = sample_truncated(u, inp, CutoffPolicy(8, noise.xi), report.sample_budget, seed=12)
print(distinguish(exact, same, omega).verdict.value)
