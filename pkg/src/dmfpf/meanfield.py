"""Grid-quadrature engine for the mean-field objects (dimensions 1 and 2).

Instead of particles, everything here is driven by a reference density rho on
a regular grid.  The building blocks mirror the particle construction:

    nu(y)     = rho(y) / (g * rho(y))^(1/2)
    p(x, y)   = g(x, y) nu(y) / (g * nu)(x)          transition density
    (T f)(x)  = integral p(x, y) f(y) dy             Markov operator
    pi(x)    ~= nu(x) * (g * nu)(x), normalised      invariant density of T

(The last identity is exact: integral pi(x) p(x, y) dx = nu(y) (g*nu)(y).)
The potential solves  phi = T phi + eps (h - hhat),  hhat = integral h pi,
anchored to pi-mean zero, and the mean-field gain at x is the covariance

    K(x) = (1/2 eps) [ int R y p(x,y) dy - (int y p(x,y) dy)(int R p(x,y) dy) ],

with R = phi + eps h.  All integrals are trapezoid quadrature; on 2-d tensor
grids the Gaussian kernel factorises, so convolutions cost two axis matmuls.
Dense grids make this a desk-scale tool: the O(n^2)-per-axis convolutions are
the scaling bottleneck and are the reason d >= 3 is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    HypothesisViolationError,
    IterationError,
    TailError,
)

__all__ = [
    "DensityGrid",
    "MeanFieldField",
    "transition_density",
    "transition_row",
    "solve_meanfield_fixed_point",
    "meanfield_gain",
    "gain_on_grid",
    "gain_bound_certificate",
    "poincare_check",
]

_DENOM_FLOOR = 1e-300
_MASS_TOL = 1e-6


def _trapezoid_weights(x):
    w = np.empty_like(x)
    w[1:-1] = 0.5 * (x[2:] - x[:-2])
    w[0] = 0.5 * (x[1] - x[0])
    w[-1] = 0.5 * (x[-1] - x[-2])
    return w


@dataclass(frozen=True)
class DensityGrid:
    """Reference density rho sampled on a regular 1-d or 2-d tensor grid.

    axes : tuple of strictly increasing node arrays, one per dimension
    rho  : density values, shape (n1,) or (n1, n2), >= 0, unit mass within
           1e-6 under trapezoid quadrature
    c_v  : optional strong log-concavity modulus of -log rho (a user-supplied
           property of the catalogued density, not estimated from the values)
    """

    axes: tuple
    rho: np.ndarray
    c_v: float | None = None

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if len(axes) not in (1, 2):
            raise ConfigError(f"grid must be 1-d or 2-d, got {len(axes)} axes")
        for a in axes:
            if a.ndim != 1 or a.size < 3 or np.any(np.diff(a) <= 0):
                raise DomainError("each axis must be strictly increasing with >= 3 nodes")
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != tuple(a.size for a in axes):
            raise DomainError(f"rho shape {rho.shape} does not match the axes")
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise DomainError("rho must be finite and non-negative")
        mass = self._mass(axes, rho)
        if abs(mass - 1.0) > _MASS_TOL:
            raise DomainError(f"rho integrates to {mass!r}, not 1 within {_MASS_TOL}")
        if self.c_v is not None and not self.c_v >= 0:
            raise ConfigError("c_v must be >= 0 when given")
        for a in axes:
            a.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "rho", rho)

    @staticmethod
    def _mass(axes, rho):
        w = [_trapezoid_weights(a) for a in axes]
        if len(axes) == 1:
            return float(w[0] @ rho)
        return float(w[0] @ rho @ w[1])

    @property
    def dim(self) -> int:
        return len(self.axes)

    def weights(self):
        return tuple(_trapezoid_weights(a) for a in self.axes)

    @classmethod
    def from_function(cls, fn, bounds, n=2001, c_v=None) -> "DensityGrid":
        """Sample an (unnormalised) density function and normalise by
        quadrature.  `bounds` is ((lo, hi), ...) per axis; `n` is the node
        count per axis (int or per-axis tuple)."""
        bounds = [tuple(b) for b in bounds]
        ns = [n] * len(bounds) if np.isscalar(n) else list(n)
        axes = tuple(np.linspace(lo, hi, int(m)) for (lo, hi), m in zip(bounds, ns))
        if len(axes) == 1:
            vals = np.asarray(fn(axes[0]), dtype=float)
        else:
            XX, YY = np.meshgrid(axes[0], axes[1], indexing="ij")
            vals = np.asarray(fn(XX, YY), dtype=float)
        mass = cls._mass(axes, vals)
        if not mass > 0:
            raise DomainError("density has zero mass on the grid")
        return cls(axes=axes, rho=vals / mass, c_v=c_v)

    @classmethod
    def gaussian(cls, sigma=1.0, dim=1, n=2001, span_sigmas=8.0, center=0.0) -> "DensityGrid":
        """Centred isotropic Gaussian with the exact log-concavity modulus
        c_v = 1/sigma^2; the default grid covers +-8 sigma with 2001 nodes."""
        sigma = float(sigma)
        if sigma <= 0:
            raise ConfigError("sigma must be positive")
        lo, hi = center - span_sigmas * sigma, center + span_sigmas * sigma
        pdf1 = lambda t: np.exp(-0.5 * ((t - center) / sigma) ** 2)
        if dim == 1:
            return cls.from_function(pdf1, [(lo, hi)], n=n, c_v=1.0 / sigma**2)
        return cls.from_function(
            lambda X, Y: pdf1(X) * pdf1(Y), [(lo, hi), (lo, hi)], n=n, c_v=1.0 / sigma**2
        )


class _Quadrature:
    """Cached kernel-quadrature machinery for one (grid, epsilon) pair."""

    def __init__(self, grid: DensityGrid, epsilon: float):
        if not epsilon > 0:
            raise ConfigError("epsilon must be positive")
        self.grid = grid
        self.epsilon = float(epsilon)
        self.w = grid.weights()
        # per-axis kernel matrices with the quadrature weights folded in
        self.Kw = []
        for a, w in zip(grid.axes, self.w):
            diff = a[:, None] - a[None, :]
            self.Kw.append(np.exp(-diff * diff / (4.0 * epsilon)) * w[None, :])
        self.g_rho = self.conv(grid.rho)
        if np.any(self.g_rho <= 0):
            raise TailError("g * rho vanished on the grid; widen the grid or epsilon")
        self.nu = grid.rho / np.sqrt(self.g_rho)
        self.g_nu = self.conv(self.nu)
        pi = self.nu * self.g_nu
        self.pi = pi / self.integrate(pi)

    def conv(self, f):
        """(g * f) on the nodes, trapezoid-weighted."""
        if self.grid.dim == 1:
            return self.Kw[0] @ f
        return self.Kw[0] @ f @ self.Kw[1].T

    def integrate(self, f):
        if self.grid.dim == 1:
            return float(self.w[0] @ f)
        return float(self.w[0] @ f @ self.w[1])

    def apply_T(self, f):
        return self.conv(self.nu * f) / self.g_nu

    def node_coords(self, axis):
        """Coordinate field of one axis over the full grid shape."""
        if self.grid.dim == 1:
            return self.grid.axes[0]
        return np.meshgrid(*self.grid.axes, indexing="ij")[axis]

    def kernel_row(self, x):
        """g(x, .) on the nodes for an arbitrary point x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size != self.grid.dim:
            raise DomainError(f"probe has dim {x.size}, grid has dim {self.grid.dim}")
        rows = [
            np.exp(-((a - xi) ** 2) / (4.0 * self.epsilon))
            for a, xi in zip(self.grid.axes, x)
        ]
        if self.grid.dim == 1:
            return rows[0]
        return rows[0][:, None] * rows[1][None, :]

    def p_row(self, x):
        """p(x, .) on the nodes.  Raises TailError when the denominator
        g * nu(x) underflows (probe far outside the density support)."""
        row = self.kernel_row(x)
        denom = self.integrate(row * self.nu)
        if denom < _DENOM_FLOOR:
            raise TailError(f"g * nu underflow at probe {np.asarray(x).tolist()}")
        return row * self.nu / denom


@dataclass(frozen=True)
class MeanFieldField:
    """Solved mean-field potential and companions on the grid nodes."""

    phi: np.ndarray
    R: np.ndarray
    hhat: float
    nu: np.ndarray
    pi: np.ndarray
    residual: float
    iterations: int
    epsilon: float

    def __post_init__(self):
        for name in ("phi", "R", "nu", "pi"):
            getattr(self, name).setflags(write=False)


def _h_on_grid(grid: DensityGrid, h):
    if callable(h):
        if grid.dim == 1:
            return np.asarray(h(grid.axes[0][:, None]), dtype=float)
        XX, YY = np.meshgrid(*grid.axes, indexing="ij")
        pts = np.stack([XX.ravel(), YY.ravel()], axis=1)
        return np.asarray(h(pts), dtype=float).reshape(XX.shape)
    arr = np.asarray(h, dtype=float)
    if arr.shape != grid.rho.shape:
        raise DomainError("h values do not match the grid shape")
    return arr


def transition_row(x, grid: DensityGrid, epsilon: float) -> np.ndarray:
    """p(x, .) sampled on all grid nodes (integrates to ~1 by quadrature)."""
    return _Quadrature(grid, epsilon).p_row(x)


def transition_density(x, y, grid: DensityGrid, epsilon: float) -> float:
    """Pointwise p(x, y); y may lie between nodes (nu linearly interpolated
    along each axis).  Same tail failure mode as `transition_row`."""
    q = _Quadrature(grid, epsilon)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    row = q.kernel_row(x)
    denom = q.integrate(row * q.nu)
    if denom < _DENOM_FLOOR:
        raise TailError(f"g * nu underflow at probe {x.tolist()}")
    d2 = float(np.sum((x - y) ** 2))
    if grid.dim == 1:
        nu_y = float(np.interp(y[0], grid.axes[0], q.nu))
    else:
        i = np.interp(y[0], grid.axes[0], np.arange(grid.axes[0].size))
        j = np.interp(y[1], grid.axes[1], np.arange(grid.axes[1].size))
        i0, j0 = int(np.floor(i)), int(np.floor(j))
        i0 = min(i0, grid.axes[0].size - 2)
        j0 = min(j0, grid.axes[1].size - 2)
        fi, fj = i - i0, j - j0
        nu_y = float(
            (1 - fi) * (1 - fj) * q.nu[i0, j0]
            + fi * (1 - fj) * q.nu[i0 + 1, j0]
            + (1 - fi) * fj * q.nu[i0, j0 + 1]
            + fi * fj * q.nu[i0 + 1, j0 + 1]
        )
    return float(np.exp(-d2 / (4.0 * epsilon)) * nu_y / denom)


def solve_meanfield_fixed_point(
    grid: DensityGrid,
    h,
    epsilon: float,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> MeanFieldField:
    """Iterate phi <- T phi + eps (h - hhat), anchored to pi-mean zero, until
    the sup-norm residual drops below `tol`.

    Weak contraction (e.g. small eps against a heavy-tailed rho) surfaces as
    an IterationError carrying the last residual.
    """
    if not tol > 0:
        raise ConfigError("tol must be positive")
    q = _Quadrature(grid, epsilon)
    hg = _h_on_grid(grid, h)
    hhat = q.integrate(q.pi * hg)
    source = epsilon * (hg - hhat)

    def anchored(f):
        return f - q.integrate(q.pi * f)

    phi = np.zeros_like(hg)
    budget = 1000 if max_iter is None else max_iter
    adaptive = max_iter is None
    prev = None
    ratios = []
    k = 0
    while True:
        image = q.apply_T(phi) + source
        resid = float(np.max(np.abs(phi - image)))
        if resid <= tol:
            return MeanFieldField(
                phi=phi, R=phi + epsilon * hg, hhat=hhat, nu=q.nu, pi=q.pi,
                residual=resid, iterations=k, epsilon=epsilon,
            )
        if prev is not None and prev > 0:
            ratios.append(resid / prev)
        if adaptive and len(ratios) >= 10:
            lam = float(np.median(ratios[-5:]))
            if lam < 1.0:
                needed = k + int(np.ceil(np.log(max(resid / tol, np.e))
                                         / -np.log(lam)))
                budget = min(max(1000, needed + 10 * int(np.ceil(1.0 / (1.0 - lam)))),
                             500_000)
        if k >= budget:
            raise IterationError(
                f"mean-field fixed point not within tol={tol} after {k} sweeps "
                f"(residual {resid:.3e})",
                last_residual=resid, iterations=k)
        prev = resid
        phi = anchored(image)
        k += 1


def meanfield_gain(x, grid: DensityGrid, field: MeanFieldField, epsilon: float) -> np.ndarray:
    """Gain d-vector at an arbitrary probe x by direct quadrature."""
    q = _Quadrature(grid, epsilon)
    p = q.p_row(x)
    ER = q.integrate(field.R * p)
    out = np.empty(grid.dim)
    for c in range(grid.dim):
        yc = q.node_coords(c)
        out[c] = (q.integrate(field.R * yc * p) - q.integrate(yc * p) * ER) / (2.0 * epsilon)
    return out


def gain_on_grid(grid: DensityGrid, field: MeanFieldField, epsilon: float) -> np.ndarray:
    """Gain at every grid node via convolutions; shape (..., d)."""
    q = _Quadrature(grid, epsilon)
    ER = q.conv(q.nu * field.R) / q.g_nu
    out = np.empty(grid.rho.shape + (grid.dim,))
    for c in range(grid.dim):
        yc = q.node_coords(c)
        Ey = q.conv(q.nu * yc) / q.g_nu
        ERy = q.conv(q.nu * field.R * yc) / q.g_nu
        out[..., c] = (ERy - Ey * ER) / (2.0 * epsilon)
    return out


def _grad_frobenius(grid: DensityGrid, K: np.ndarray) -> np.ndarray:
    """Frobenius norm of the central-difference Jacobian of the gain field,
    evaluated on interior nodes (step = grid spacing)."""
    sq = np.zeros(tuple(s - 2 for s in grid.rho.shape))
    for c in range(K.shape[-1]):
        for b, a in enumerate(grid.axes):
            hi = [slice(1, -1)] * grid.dim
            lo = [slice(1, -1)] * grid.dim
            hi[b] = slice(2, None)
            lo[b] = slice(None, -2)
            span = (a[2:] - a[:-2]).reshape(
                [-1 if i == b else 1 for i in range(grid.dim)]
            )
            dKc = (K[tuple(hi) + (c,)] - K[tuple(lo) + (c,)]) / span
            sq += dKc * dKc
    return np.sqrt(sq)


def gain_bound_certificate(
    grid: DensityGrid, h, epsilon: float, grad_h_inf: float, tol: float = 1e-10
) -> dict:
    """Check the uniform gain bounds implied by log-concavity.

    With c_g = 1/(4 eps) + c_v (valid only when c_v > 1/(4 eps)):

        bound1 = (|grad h|_inf / 2 c_g) (4 eps c_g - 1)/(2 eps c_g - 1)
        bound2 = (d |grad h|_inf / eps) c_g^(-3/2) (4 eps c_g - 1)/(2 eps c_g - 1)

    and the measured sups are taken over the grid (gain) and interior nodes
    (finite-difference Jacobian).  Returns the measurements, the bounds, and
    per-bound pass flags.
    """
    if grid.c_v is None:
        raise ConfigError("grid carries no log-concavity modulus c_v")
    if not grid.c_v > 1.0 / (4.0 * epsilon):
        raise HypothesisViolationError(
            f"c_v={grid.c_v} <= 1/(4 eps)={1.0 / (4.0 * epsilon)}: bound denominators invalid"
        )
    c_g = 1.0 / (4.0 * epsilon) + grid.c_v
    ratio = (4.0 * epsilon * c_g - 1.0) / (2.0 * epsilon * c_g - 1.0)
    bound1 = grad_h_inf / (2.0 * c_g) * ratio
    bound2 = grid.dim * grad_h_inf / epsilon * c_g ** -1.5 * ratio

    field = solve_meanfield_fixed_point(grid, h, epsilon, tol=tol)
    K = gain_on_grid(grid, field, epsilon)
    sup_K = float(np.max(np.linalg.norm(K, axis=-1)))
    sup_gradK = float(np.max(_grad_frobenius(grid, K)))
    return {
        "epsilon": epsilon,
        "c_v": grid.c_v,
        "c_g": c_g,
        "grad_h_inf": grad_h_inf,
        "bound1": bound1,
        "measured_sup_K": sup_K,
        "bound1_pass": sup_K <= bound1,
        "bound2": bound2,
        "measured_sup_gradK": sup_gradK,
        "bound2_pass": sup_gradK <= bound2,
    }


def poincare_check(grid: DensityGrid, epsilon: float, x_probes, slack: float = 1e-3) -> dict:
    """Per-coordinate variance of p(x, .) against the 1/c_g ceiling.

    The transition kernel inherits log-concavity modulus c_g from the
    reference density, so each coordinate variance obeys Var <= 1/c_g; the
    quadrature gets `slack` on top.
    """
    if grid.c_v is None:
        raise ConfigError("grid carries no log-concavity modulus c_v")
    c_g = 1.0 / (4.0 * epsilon) + grid.c_v
    ceiling = 1.0 / c_g + slack
    q = _Quadrature(grid, epsilon)
    probes = np.asarray(x_probes, dtype=float)
    if probes.ndim <= 1:
        probes = probes.reshape(-1, 1) if grid.dim == 1 else probes.reshape(1, -1)
    rows = []
    for x in probes:
        p = q.p_row(x)
        variances = []
        for c in range(grid.dim):
            yc = q.node_coords(c)
            m = q.integrate(yc * p)
            variances.append(q.integrate((yc - m) ** 2 * p))
        rows.append({
            "probe": x.tolist(),
            "variances": variances,
            "max_variance": max(variances),
            "pass": max(variances) <= ceiling,
        })
    return {
        "epsilon": epsilon,
        "c_g": c_g,
        "ceiling": ceiling,
        "probes": rows,
        "pass": all(r["pass"] for r in rows),
    }
