"""Truncated Gaussian on the unit ball: PLMC against SRNLMC.

A smaller version of the toy study: 2000 chains, 2000 steps, W1 per
coordinate against an exact rejection sample every 200 steps.
Run with ``python demos/toy_truncated_gaussian.py`` (about ten seconds).
"""

import numpy as np

from skewlangevin.diagnostics import w1_per_dimension
from skewlangevin.fields import ConstantTridiag, Cross3D, ZeroField
from skewlangevin.geometry import Ball
from skewlangevin.oracle import GaussianProposal, moments, rejection_sample
from skewlangevin.samplers import SamplerConfig, run_ensemble
from skewlangevin.targets import QuadraticGaussian

K = Ball.unit(3)
pot = QuadraticGaussian.from_cov_diag((0.25, 1.0, 4.0))
x0 = np.array([0.2, 0.3, 0.5])

ref = rejection_sample(K, GaussianProposal.from_potential(pot), 5000, seed=1)
mean, cov = moments(ref)
print(f"rejection oracle: acceptance {ref.acceptance_rate:.3f}")
print("  mean", np.round(mean, 3), " variances", np.round(np.diag(cov), 3))

methods = {"PLMC": ZeroField(), "SRNLMC J_a": ConstantTridiag(1.0, 3), "SRNLMC J_s": Cross3D(5.0)}
for name, fld in methods.items():
    cfg = SamplerConfig(5e-4, 2000, fld, fallback="euclidean", thin=200)
    ens = run_ensemble(x0, cfg, K, pot, 2000, seed_base=0)
    print(f"\n{name}  ({ens.metadata['algorithm']}, {int(ens.fallback_counts.sum())} ray-miss fallbacks)")
    for k in ens.steps[1::2]:
        w = w1_per_dimension(ens.at_step(k), ref.points)
        print(f"  step {k:5d}  W1 = {np.round(w, 4)}")
