"""RW stays bounded as the posterior collapses while KL blows up.

Run: python demos/rw_vs_kl.py
"""

import numpy as np

from sparsetopic.gaussian import DiagGaussian, kl_divergence, rw_divergence, rw_monte_carlo_oracle

prior = DiagGaussian(np.zeros(2), np.ones(2))
print(f"{'sigma_q':>10} {'RW':>10} {'KL':>10}")
for s in (1.0, 0.1, 1e-2, 1e-4, 1e-6):
    q = DiagGaussian(np.full(2, 0.5), np.full(2, s))
    print(f"{s:>10.0e} {rw_divergence(q, prior):>10.4f} {kl_divergence(q, prior):>10.4f}")

q = DiagGaussian(np.array([0.3, -1.0]), np.array([0.5, 2.0]))
print("closed form", rw_divergence(q, prior), "monte carlo", rw_monte_carlo_oracle(q, prior, n=10**6))
