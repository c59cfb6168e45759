"""Fixed-point solve for the gain potential and the per-particle gain vectors.

With T, pi from `kernels` and h sampled at the particles, the potential solves

    Phi = T Phi + eps * (h - hhat * 1),     hhat = sum_i pi_i h(X^i),

which determines Phi only up to an additive constant (constants span the
kernel of I - T).  Every sweep therefore re-anchors Phi to pi-mean zero; the
gain is unaffected because it depends on r = Phi + eps*h only through
differences.

Because the closed-form pi is generally not an exact left fixed point of T,
the source carries a small rank-one inconsistency along the constant vector:
the raw residual ||Phi - T Phi - source||_inf cannot reach machine zero.
That component is pure gauge (a constant shift of Phi), so the solver
measures and reports the residual of the anchored equation,

    residual = || Phi - A(T Phi + source) ||_inf,   A = pi-mean-zero projector,

which does converge geometrically; the anchored limit solves the fixed point
exactly up to a constant re-definition of the observation mean and yields
the identical gain.  The per-particle gain is the row-weighted cross-covariance

    K_i = (1/2 eps) [ sum_j T_ij X^j r_j - (sum_j T_ij X^j)(sum_j T_ij r_j) ].

Two solver modes:

* ``fixed_iterates``: exactly the truncated series eps * sum_{n=0..L} T^n
  (h - hhat 1), anchored.  `iterates` counts applications of T.
* ``to_tolerance``:  iterate until the anchored residual drops below `tol`.
  The iteration budget adapts to the empirically observed contraction factor
  (the geometrically projected sweeps still needed, plus ten mixing horizons
  of margin; floor 1000) unless `max_iter` is given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DomainError, IterationError, SingularityError
from .kernels import Ensemble, KernelConfig, MarkovBundle, kernel_cross, ordered_sum

__all__ = [
    "GainConfig",
    "GainField",
    "hhat_weighted",
    "solve_fixed_point",
    "gain_at_particles",
    "gain_at_points",
    "compute_gain_field",
    "evaluate_potential_at",
    "constant_gain",
    "exact_gain_1d",
]

_MAX_ITER_CEILING = 500_000

_RHO_FLOOR = 1e-300


@dataclass(frozen=True)
class GainConfig:
    """Solver configuration for the potential fixed point.

    mode      : "to_tolerance" (default) or "fixed_iterates"
    tol       : sup-norm residual target in to_tolerance mode
    max_iter  : explicit iteration cap; None = adaptive (see module docstring)
    iterates  : series truncation order L >= 1 in fixed_iterates mode
    hhat      : "pi" weights the observation mean by the closed-form pi
                (the default everywhere); "uniform" uses the plain empirical
                mean, kept as a switch for sensitivity studies.
    """

    epsilon: float
    mode: str = "to_tolerance"
    tol: float = 1e-8
    max_iter: int | None = None
    iterates: int | None = None
    hhat: str = "pi"

    def __post_init__(self):
        eps = float(self.epsilon)
        if not np.isfinite(eps) or eps <= 0:
            raise ConfigError(f"epsilon must be positive and finite, got {self.epsilon}")
        object.__setattr__(self, "epsilon", eps)
        if self.mode not in ("to_tolerance", "fixed_iterates"):
            raise ConfigError(f"unknown solver mode {self.mode!r}")
        if self.mode == "to_tolerance":
            if not (self.tol > 0):
                raise ConfigError("tol must be positive")
        else:
            if self.iterates is None or int(self.iterates) < 1:
                raise ConfigError("fixed_iterates mode needs iterates >= 1")
            object.__setattr__(self, "iterates", int(self.iterates))
        if self.hhat not in ("pi", "uniform"):
            raise ConfigError(f"unknown hhat weighting {self.hhat!r}")

    def kernel(self) -> KernelConfig:
        return KernelConfig(self.epsilon)


@dataclass(frozen=True)
class GainField:
    """Solved potential and derived quantities on one ensemble.

    phi      : (N,) anchored potential
    r        : (N,) r_j = phi_j + eps * h(X^j)
    hhatN    : weighted observation mean used in the source term
    residual : measured sup-norm fixed-point residual of phi
    K        : (N, d) gain vectors, or None if not yet evaluated
    """

    phi: np.ndarray
    r: np.ndarray
    hhatN: float
    residual: float
    iterations: int
    K: np.ndarray | None = None

    def __post_init__(self):
        self.phi.setflags(write=False)
        self.r.setflags(write=False)
        if self.K is not None:
            self.K.setflags(write=False)


def hhat_weighted(bundle: MarkovBundle, h_values: np.ndarray, mode: str = "pi") -> float:
    """Observation mean, pi-weighted by default (permutation-invariant sum)."""
    h = np.asarray(h_values, dtype=float)
    if mode == "uniform":
        return float(ordered_sum(h) / h.size)
    return float(ordered_sum(bundle.pi * h))


def solve_fixed_point(
    bundle: MarkovBundle,
    h_values: np.ndarray,
    cfg: GainConfig,
    phi0: np.ndarray | None = None,
) -> GainField:
    """Solve the potential fixed point on one ensemble.

    `phi0` warm-starts the to_tolerance iteration (the residual certificate
    is unchanged; only the iteration count benefits).  Raises IterationError
    with the last residual when the budget is exhausted, which in practice
    signals a slowly mixing matrix.
    """
    h = np.asarray(h_values, dtype=float)
    if h.shape != (bundle.n,):
        raise DomainError(f"h_values shape {h.shape} != ({bundle.n},)")
    if not np.all(np.isfinite(h)):
        raise DomainError("non-finite observation values")
    T, pi = bundle.T, bundle.pi
    hhat = hhat_weighted(bundle, h, cfg.hhat)
    source = cfg.epsilon * (h - hhat)

    def anchored(v):
        return v - (pi @ v)

    if cfg.mode == "fixed_iterates":
        phi = source.copy()
        for _ in range(cfg.iterates):
            phi = T @ phi + source
        phi = anchored(phi)
        resid = float(np.max(np.abs(phi - anchored(T @ phi + source))))
        return GainField(phi=phi, r=phi + cfg.epsilon * h, hhatN=hhat,
                         residual=resid, iterations=cfg.iterates)

    phi = anchored(np.asarray(phi0, dtype=float).copy()) if phi0 is not None \
        else np.zeros(bundle.n)
    budget = cfg.max_iter if cfg.max_iter is not None else 1000
    adaptive = cfg.max_iter is None
    prev_resid = None
    ratios = []
    k = 0
    while True:
        image = anchored(T @ phi + source)
        resid = float(np.max(np.abs(phi - image)))
        if resid <= cfg.tol:
            return GainField(phi=phi, r=phi + cfg.epsilon * h, hhatN=hhat,
                             residual=resid, iterations=k)
        if prev_resid is not None and prev_resid > 0:
            ratios.append(resid / prev_resid)
        if adaptive and len(ratios) >= 10:
            lam = float(np.median(ratios[-5:]))
            if lam < 1.0:
                # sweeps still needed at the observed contraction, plus ten
                # mixing horizons of margin
                needed = k + math.ceil(math.log(max(resid / cfg.tol, math.e))
                                       / -math.log(lam))
                budget = min(max(1000, needed + 10 * math.ceil(1.0 / (1.0 - lam))),
                             _MAX_ITER_CEILING)
        if k >= budget:
            raise IterationError(
                f"fixed point not within tol={cfg.tol} after {k} sweeps "
                f"(residual {resid:.3e}); the Markov matrix mixes too slowly",
                last_residual=resid, iterations=k)
        prev_resid = resid
        phi = image
        k += 1


def gain_at_particles(
    bundle: MarkovBundle, ens: Ensemble, field: GainField, cfg: GainConfig
) -> np.ndarray:
    """(N, d) gain vectors via the weighted cross-covariance form."""
    if ens.n != bundle.n:
        raise DomainError("ensemble and Markov bundle sizes differ")
    return _covariance_gain(bundle.T, ens.positions, field.r, cfg.epsilon)


def gain_at_points(
    points, ens: Ensemble, bundle: MarkovBundle, field: GainField, cfg: GainConfig
) -> np.ndarray:
    """Gain evaluated off the particle cloud.

    The query rows reuse the ensemble's normalisers: W_xj proportional to
    g(x, X^j)/u_j, normalised over j, which is the weighting the potential
    interpolant (see `evaluate_potential_at`) induces at x.  Row sums use the
    same value-ordered accumulation as `build_markov`, so querying at the
    ensemble's own positions reproduces its T rows bit for bit.  Returns (M, d).
    """
    W = kernel_cross(points, ens, cfg.kernel()) / bundle.u[None, :]
    W /= ordered_sum(W, axis=1)[:, None]
    return _covariance_gain(W, ens.positions, field.r, cfg.epsilon)


def _covariance_gain(W, X, r, epsilon):
    Exr = W @ (X * r[:, None])
    Ex = W @ X
    Er = W @ r
    return (Exr - Ex * Er[:, None]) / (2.0 * epsilon)


def compute_gain_field(
    bundle: MarkovBundle,
    ens: Ensemble,
    h_values: np.ndarray,
    cfg: GainConfig,
    phi0: np.ndarray | None = None,
) -> GainField:
    """Solve the fixed point and attach the per-particle gain in one call."""
    field = solve_fixed_point(bundle, h_values, cfg, phi0=phi0)
    K = gain_at_particles(bundle, ens, field, cfg)
    return replace(field, K=K)


def evaluate_potential_at(
    x, ens: Ensemble, bundle: MarkovBundle, field: GainField, cfg: GainConfig, h
) -> float:
    """Potential interpolant at an arbitrary point:

        phi(x) = (sum_j qt(x, X^j) Phi_j) / (sum_j qt(x, X^j))
                 + eps * (h(x) - hhat).

    At a particle of an exactly solved field this reproduces Phi_i.
    `h` is the scalar observation function.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    W = kernel_cross(x[None, :], ens, cfg.kernel())[0] / bundle.u
    hx = float(h(x[None, :])[0]) if callable(h) else float(h)
    return float(W @ field.phi / W.sum() + cfg.epsilon * (hx - field.hhatN))


def constant_gain(ens: Ensemble, h_values: np.ndarray) -> np.ndarray:
    """Empirical state/observation cross-covariance (1/N convention).

    This is the constant-gain approximation: the same d-vector applied to
    every particle turns the update into the ensemble Kalman-Bucy step, and
    it is the large-bandwidth limit of the particle gain.
    """
    h = np.asarray(h_values, dtype=float)
    if h.shape != (ens.n,):
        raise DomainError(f"h_values shape {h.shape} != ({ens.n},)")
    X = ens.positions
    dX = X - X.mean(axis=0)
    dh = h - h.mean()
    return dX.T @ dh / ens.n


def exact_gain_1d(grid_x, rho, h_values, x_query) -> np.ndarray:
    """Exact 1-d gain by quadrature: the derivative of the potential solving
    the weighted Poisson problem for density rho and observation h,

        gain(x) = -(1/rho(x)) * integral_{-inf}^{x} (h(y) - hhat) rho(y) dy,

    with decaying flux at the left boundary.  Trapezoid rule on `grid_x`
    (which must cover all queries); hhat is the rho-weighted mean of h.

    Raises DomainError for queries outside the grid and SingularityError when
    the density at a query sits below the positivity floor (1e-300).
    """
    x = np.asarray(grid_x, dtype=float)
    rho = np.asarray(rho, dtype=float)
    h = np.asarray(h_values, dtype=float)
    if x.ndim != 1 or x.size < 3 or np.any(np.diff(x) <= 0):
        raise DomainError("grid_x must be strictly increasing with >= 3 nodes")
    if rho.shape != x.shape or h.shape != x.shape:
        raise DomainError("rho and h_values must match grid_x")
    if np.any(rho < 0):
        raise DomainError("density must be non-negative")
    q = np.asarray(x_query, dtype=float)
    scalar = q.ndim == 0
    q = np.atleast_1d(q)
    if q.min() < x[0] or q.max() > x[-1]:
        raise DomainError("query outside quadrature grid")

    dx = np.diff(x)
    mass = float(np.sum(0.5 * dx * (rho[1:] + rho[:-1])))
    hhat = float(np.sum(0.5 * dx * ((h * rho)[1:] + (h * rho)[:-1]))) / mass
    integrand = (h - hhat) * rho
    cum = np.concatenate(
        ([0.0], np.cumsum(0.5 * dx * (integrand[1:] + integrand[:-1])))
    )
    F = np.interp(q, x, cum)
    rho_q = np.interp(q, x, rho)
    if np.any(rho_q < _RHO_FLOOR):
        raise SingularityError("density below positivity floor at a query point")
    out = -F / rho_q
    return float(out[0]) if scalar else out
