"""Compare the diffusion-map gain against the exact 1-d gain.

Samples a Gaussian cloud with a linear observation function, where the exact
gain is the constant sigma^2 = 1, then sweeps the kernel bandwidth to show the
bridge from the spatially resolved small-bandwidth gain to the constant
(cross-covariance) gain at large bandwidth.
"""

import numpy as np

from dmfpf import (
    Ensemble, GainConfig, KernelConfig, build_markov, compute_gain_field,
    constant_gain, exact_gain_1d, gain_at_points,
)

rng = np.random.default_rng(1)
X = rng.standard_normal((2000, 1))
ens = Ensemble(X)
h = X[:, 0]

gx = np.linspace(-8, 8, 4001)
rho = np.exp(-0.5 * gx**2)
queries = np.linspace(-2.0, 2.0, 9)
exact = exact_gain_1d(gx, rho, gx, queries)
k_const = constant_gain(ens, h)[0]

print(f"constant (cross-covariance) gain: {k_const:.4f}")
print(f"{'x':>6} {'exact':>8}", end="")
for eps in (0.1, 0.5, 2.0):
    print(f"  eps={eps:<5}", end="")
print()

columns = {}
for eps in (0.1, 0.5, 2.0):
    bundle = build_markov(ens, KernelConfig(eps))
    field = compute_gain_field(bundle, ens, h, GainConfig(eps, tol=1e-9))
    columns[eps] = gain_at_points(queries[:, None], ens, bundle, field,
                                  GainConfig(eps, tol=1e-9))[:, 0]
    print(f"  particle-averaged gain at eps={eps}: {field.K.mean():.4f}")

for i, q in enumerate(queries):
    print(f"{q:6.2f} {exact[i]:8.4f}", end="")
    for eps in (0.1, 0.5, 2.0):
        print(f"  {columns[eps][i]:8.4f}", end="")
    print()
