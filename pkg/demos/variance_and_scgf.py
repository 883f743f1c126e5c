"""Long-run behaviour: asymptotic variance and the SCGF.

Batch-means variance of the time average of x_1 for PLMC and SRNLMC on the
truncated Gaussian, then SCGF estimates for a few observables.
Run with ``python demos/variance_and_scgf.py`` (under a minute).
"""

import numpy as np

from skewlangevin.diagnostics import asymptotic_variance_batch_means, discard_burn_in, scgf_estimate
from skewlangevin.fields import Cross3D, ZeroField
from skewlangevin.geometry import Ball
from skewlangevin.harness import long_run_observable
from skewlangevin.samplers import SamplerConfig
from skewlangevin.targets import QuadraticGaussian

K = Ball.unit(3)
pot = QuadraticGaussian.from_cov_diag((0.25, 1.0, 4.0))
x0 = np.array([0.2, 0.3, 0.5])

for name, fld in (("PLMC", ZeroField()), ("SRNLMC J_s", Cross3D(5.0))):
    trace = long_run_observable(x0, SamplerConfig(5e-4, 200_000, fld), K, pot, seed=0)
    est = asymptotic_variance_batch_means(discard_burn_in(trace, 0.2))
    print(f"{name:11s} mean x_1 = {trace.mean():+.4f}  sigma^2 = {est.sigma2_hat:.4f} +- {est.standard_error:.4f}"
          f"  ({est.n_batches} batches of {est.batch_len})")

# SCGF on the truncated standard Gaussian; constants come back exactly
std = QuadraticGaussian.from_cov_diag((1.0, 1.0, 1.0))
obs = {"0": lambda X: 0.0, "0.5": lambda X: 0.5, "x_1": lambda X: X[:, 0], "x_1 + 0.5": lambda X: X[:, 0] + 0.5}
ests = scgf_estimate(K, std, ZeroField(), list(obs.values()), t_horizon=10.0, eta=5e-3, n_chains=2000, seed=0)
print()
for label, e in zip(obs, ests):
    print(f"lambda({label:9s}) = {e.lambda_hat:+.5f} +- {e.stderr:.5f}")
