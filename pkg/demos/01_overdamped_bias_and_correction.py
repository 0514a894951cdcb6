"""Why the naive time-rescaled scheme is biased, and how the correction fixes it.

Three position-only integrators target a Gibbs density rho ~ exp(-V/T):

  * EM           -- Euler-Maruyama with a fixed stepsize h,
  * EM_RESCALED  -- stepsize modulated by a monitor g(x) (naive rescaling),
  * EM_IP        -- the same modulation plus the invariant-preserving
                    correction drift T * grad(g) * h.

The naive rescaling changes the sampled law to rho * g (up to normalisation),
so its histogram drifts visibly away from the target; the corrected scheme
stays on it.  We measure the L1 distance between each empirical histogram and
the quadrature reference.
"""

import numpy as np

from adaptive_langevin import (
    SamplerConfig,
    gaussian_init,
    gibbs_reference,
    histogram_l1,
    modified_harmonic,
    monitor_g3,
    sample_positions,
)
from adaptive_langevin.analysis import build_stepper

# A near-harmonic well that steepens sharply around x0 = 0.5 (local
# frequency 10), at temperature 0.1.  The monitor shrinks the stepsize
# where the frequency is high.
pot = modified_harmonic(a=10.0, b=0.1, c=0.1, x0=0.5)
mon = monitor_g3(pot, m=0.001, Mcap=2.0)
beta_inv = 0.1

# Quadrature reference for the target density on a window wide enough that
# the truncated tail mass is negligible.
ref = gibbs_reference(pot, beta_inv, lo=-9.0, hi=9.5)


def ref_pdf(x):
    X = np.asarray(x)[:, None]
    return np.exp(-pot.eval_V(X) / beta_inv) / ref.Z


cfg = SamplerConfig(h=0.05, beta_inv=beta_inv, t_final=70.0, n_traj=20000,
                    seed=11)

print(f"{'scheme':12s} {'L1 distance':>12s} {'escaped':>8s}")
for scheme in ("EM", "EM_RESCALED", "EM_IP"):
    xs, escaped = sample_positions(build_stepper(scheme, pot, mon, cfg),
                                   cfg, gaussian_init(0.5, beta_inv))
    l1 = histogram_l1(xs[:, 0], -3.0, 3.5, 200, ref_pdf)
    print(f"{scheme:12s} {l1:12.4f} {escaped:8d}")

print()
print("EM_RESCALED lands far from the target; EM_IP matches it at the")
print("same adaptive stepsizes.")
