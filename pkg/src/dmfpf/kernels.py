"""Gaussian kernels, the anisotropic normalisation, and the particle Markov matrix.

Everything downstream (gain solve, filtering steps, monitors) is built from the
row-stochastic matrix assembled here:

    g(x, y)   = exp(-|x - y|^2 / (4 eps))            unnormalised kernel
    u_j       = (sum_l g(X^j, X^l))^(1/2)
    qt(i, j)  = g(X^i, X^j) / u_j                    anisotropic normalisation
    s_i       = sum_l qt(i, l)
    T_ij      = qt(i, j) / s_i                       row-stochastic
    pi_i      = s_i / sum_j s_j                      closed-form stationary weights

All matrix quantities use the unnormalised kernel: the (4 pi eps)^(-d/2)
prefactors cancel in every ratio above.  The normalised variant is kept only
for mean-field quadrature (see `meanfield`).

Numerical notes
---------------
* Row reductions (u, s, the pi normaliser) sum their addends in ascending
  value order.  The accumulation order then depends only on the multiset of
  values, which makes the assembled matrix exactly equivariant under particle
  relabelling and independent of thread count.
* Entries are never clipped.  For |x - y|^2/(4 eps) beyond ~745 the kernel
  underflows to exactly 0 in float64; such ensembles are far outside the
  monitored operating regime and the underflow is accepted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, IterationError

__all__ = [
    "Ensemble",
    "KernelConfig",
    "MarkovBundle",
    "PowerIterationResult",
    "gaussian_kernel",
    "kernel_matrix",
    "kernel_cross",
    "build_markov",
    "stationary_by_power_iteration",
    "ordered_sum",
]


def ordered_sum(a, axis=-1):
    """Pairwise sum with the addends first sorted ascending.

    The result depends only on the multiset of values along `axis`, so any
    reduction built on it is exactly invariant under permutation of the
    addends (and trivially independent of thread count: numpy's pairwise
    reduction is single-threaded and deterministic for a fixed order).
    """
    return np.sort(a, axis=axis).sum(axis=axis)


@dataclass(frozen=True)
class Ensemble:
    """A cloud of N particle positions in d dimensions.

    positions : (N, d) float array, all entries finite, N >= 2, d >= 1.
    """

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2:
            raise DomainError(f"positions must be (N, d), got shape {pos.shape}")
        if pos.shape[0] < 2:
            raise ConfigError(f"need at least 2 particles, got {pos.shape[0]}")
        if pos.shape[1] < 1:
            raise DomainError("state dimension must be >= 1")
        if not np.all(np.isfinite(pos)):
            raise DomainError("ensemble contains non-finite coordinates")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class KernelConfig:
    """Kernel bandwidth parameter; the Gaussian has covariance 2*eps*I."""

    epsilon: float

    def __post_init__(self):
        eps = float(self.epsilon)
        if not np.isfinite(eps) or eps <= 0.0:
            raise ConfigError(f"epsilon must be positive and finite, got {self.epsilon}")
        object.__setattr__(self, "epsilon", eps)


@dataclass(frozen=True)
class MarkovBundle:
    """The assembled N x N Markov matrix together with its normalisers.

    T  : (N, N) row-stochastic, strictly positive for non-degenerate clouds
    u  : (N,)   u_j = (sum_l g(X^j, X^l))^(1/2); u_j >= 1 from the self term
    s  : (N,)   s_i = sum_l qt(i, l) > 0
    pi : (N,)   closed-form stationary weights s_i / sum_j s_j

    `pi` is the closed-form candidate; whether it is an exact fixed point of
    T is checked, never assumed (see `stationary_by_power_iteration`).
    """

    T: np.ndarray
    u: np.ndarray
    s: np.ndarray
    pi: np.ndarray
    epsilon: float

    def __post_init__(self):
        for name in ("T", "u", "s", "pi"):
            getattr(self, name).setflags(write=False)

    @property
    def n(self) -> int:
        return self.T.shape[0]


def _sq_dists(X, Y):
    """Pairwise squared distances with a fixed per-coordinate accumulation
    order, so mirrored/translated/permuted inputs reproduce entries exactly."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    d2 = np.zeros((X.shape[0], Y.shape[0]))
    for c in range(X.shape[1]):
        diff = X[:, c, None] - Y[None, :, c]
        d2 += diff * diff
    return d2


def gaussian_kernel(x, y, cfg: KernelConfig, normalized: bool = False) -> float:
    """Kernel value between two points.

    Returns exp(-|x - y|^2 / (4 eps)); with `normalized=True` the variant
    carrying the (4 pi eps)^(-d/2) prefactor.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DomainError(f"point shapes differ: {x.shape} vs {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite kernel input")
    d2 = float(np.sum((x - y) ** 2))
    val = np.exp(-d2 / (4.0 * cfg.epsilon))
    if normalized:
        val *= (4.0 * np.pi * cfg.epsilon) ** (-x.size / 2.0)
    return float(val)


def kernel_matrix(ens: Ensemble, cfg: KernelConfig) -> np.ndarray:
    """(N, N) matrix of unnormalised kernel values; exactly symmetric."""
    return np.exp(-_sq_dists(ens.positions, ens.positions) / (4.0 * cfg.epsilon))


def kernel_cross(points, ens: Ensemble, cfg: KernelConfig) -> np.ndarray:
    """(M, N) kernel values between query points and ensemble members."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[1] != ens.dim:
        raise DomainError(f"query dim {pts.shape[1]} != ensemble dim {ens.dim}")
    if not np.all(np.isfinite(pts)):
        raise DomainError("non-finite query point")
    return np.exp(-_sq_dists(pts, ens.positions) / (4.0 * cfg.epsilon))


def build_markov(ens: Ensemble, cfg: KernelConfig) -> MarkovBundle:
    """Assemble the Markov matrix, its normalisers, and the closed-form pi.

    The l-sums run over all particles including the diagonal term; the
    self-interaction g(x, x) = 1 guarantees u_j >= 1 and s_i > 0.
    """
    if ens.n < 2:
        raise ConfigError("Markov matrix needs at least 2 particles")
    G = kernel_matrix(ens, cfg)
    u = np.sqrt(ordered_sum(G, axis=1))
    Q = G / u[None, :]
    s = ordered_sum(Q, axis=1)
    T = Q / s[:, None]
    pi = s / ordered_sum(s)
    return MarkovBundle(T=T, u=u, s=s, pi=pi, epsilon=cfg.epsilon)


@dataclass(frozen=True)
class PowerIterationResult:
    """Power-iteration fixed point of nu -> nu T, plus the residual of the
    closed-form pi for comparison (the two are reported side by side, never
    asserted equal)."""

    nu: np.ndarray
    iterations: int
    residual: float
    residual_pi_closed_form: float


def stationary_by_power_iteration(
    bundle: MarkovBundle, tol: float = 1e-12, max_iter: int = 100_000
) -> PowerIterationResult:
    """Left fixed point of T by power iteration, normalised to sum 1.

    Stops when ||nu T - nu||_1 <= tol.  Also evaluates the same residual for
    the closed-form pi carried by the bundle.
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    T = bundle.T
    nu = bundle.pi.copy()
    resid = np.inf
    for k in range(max_iter + 1):
        image = nu @ T
        image /= image.sum()
        resid = float(np.abs(image - nu).sum())
        if resid <= tol:
            pi_resid = float(np.abs(bundle.pi @ T - bundle.pi).sum())
            return PowerIterationResult(
                nu=nu, iterations=k, residual=resid, residual_pi_closed_form=pi_resid
            )
        nu = image
    raise IterationError(
        f"power iteration did not reach tol={tol} in {max_iter} iterations",
        last_residual=resid,
        iterations=max_iter,
    )
