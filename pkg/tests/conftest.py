import numpy as np


def double_sum_gain(T, X, r, epsilon):
    """Literal double-sum evaluation of the gain, kept deliberately separate
    from the production covariance form so the two can cross-check each other:

        K_i = (1/2 eps) sum_j sum_k T_ij T_ik (r_j - r_k) X^j
    """
    N, d = X.shape
    out = np.empty((N, d))
    for i in range(N):
        w = T[i]
        pair = w[:, None] * w[None, :] * (r[:, None] - r[None, :])  # (j, k)
        out[i] = pair.sum(axis=1) @ X / (2.0 * epsilon)
    return out


def random_cloud(rng, n=None, d=None, scale=1.0, n_max=64, d_max=3):
    n = int(rng.integers(2, n_max + 1)) if n is None else n
    d = int(rng.integers(1, d_max + 1)) if d is None else d
    return scale * rng.standard_normal((n, d))
