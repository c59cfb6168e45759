"""Catalogued signal/observation models for the twin experiments.

The signal is  dS = drift(S) dt + dV  with unit process noise, and the scalar
observation stream is  dZ = h(S) dt + dW.  Each catalog entry carries the
analytic Lipschitz constant (and sup norm where finite) needed by the
constant calculators; nothing is estimated from samples.

Drifts (applied coordinatewise for d > 1):
    linear       a * x                       L = |a|
    double-well  a * (x - x^3)               L = |a| * sup|1 - 3x^2| on |x| <= box
    sine         a * sin(b * x)              L = |a * b|

Observations (read the first coordinate for d > 1):
    linear       c * x1                      L = |c|, unbounded
    arctan       arctan(c * x1)              L = |c|, sup = pi/2
    constant     c0                          L = 0,   sup = |c0|

The double-well drift is only locally Lipschitz; its recorded constant is the
exact one on the stated operating box (default |x| <= 3), which is where the
monitored experiments live.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = ["ModelSpec", "DRIFTS", "OBSERVATIONS"]

DRIFTS = ("linear", "double-well", "sine")
OBSERVATIONS = ("linear", "arctan", "constant")

_DOUBLE_WELL_BOX = 3.0


@dataclass(frozen=True)
class ModelSpec:
    """One drift/observation pair with its analytic constants."""

    drift: str = "linear"
    drift_params: dict = field(default_factory=lambda: {"a": -1.0})
    obs: str = "linear"
    obs_params: dict = field(default_factory=lambda: {"c": 1.0})
    dim: int = 1

    def __post_init__(self):
        if self.drift not in DRIFTS:
            raise ConfigError(f"unknown drift {self.drift!r}; catalog: {DRIFTS}")
        if self.obs not in OBSERVATIONS:
            raise ConfigError(f"unknown observation {self.obs!r}; catalog: {OBSERVATIONS}")
        if int(self.dim) < 1:
            raise ConfigError("dim must be >= 1")
        object.__setattr__(self, "dim", int(self.dim))

    # -- dynamics ---------------------------------------------------------

    def drift_fn(self, X: np.ndarray) -> np.ndarray:
        """Drift at particle positions, shape-preserving on (N, d)."""
        p = self.drift_params
        if self.drift == "linear":
            return p.get("a", -1.0) * X
        if self.drift == "double-well":
            return p.get("a", 1.0) * (X - X**3)
        return p.get("a", 1.0) * np.sin(p.get("b", 1.0) * X)

    def h_fn(self, X: np.ndarray) -> np.ndarray:
        """Scalar observation per particle: (N, d) -> (N,)."""
        x1 = np.asarray(X)[:, 0]
        p = self.obs_params
        if self.obs == "linear":
            return p.get("c", 1.0) * x1
        if self.obs == "arctan":
            return np.arctan(p.get("c", 1.0) * x1)
        return np.full(x1.shape, float(p.get("c0", 0.0)))

    # -- analytic constants ----------------------------------------------

    @property
    def L_M(self) -> float:
        p = self.drift_params
        if self.drift == "linear":
            return abs(p.get("a", -1.0))
        if self.drift == "double-well":
            box = p.get("box", _DOUBLE_WELL_BOX)
            return abs(p.get("a", 1.0)) * max(abs(1.0 - 3.0 * box**2), 1.0)
        return abs(p.get("a", 1.0) * p.get("b", 1.0))

    @property
    def L_h(self) -> float:
        if self.obs == "constant":
            return 0.0
        return abs(self.obs_params.get("c", 1.0))

    @property
    def h_inf(self) -> float | None:
        """Sup norm of h, or None when unbounded."""
        if self.obs == "arctan":
            return np.pi / 2.0
        if self.obs == "constant":
            return abs(float(self.obs_params.get("c0", 0.0)))
        return None

    @property
    def grad_h_inf(self) -> float:
        """Sup norm of grad h (same as L_h for the scalar catalog)."""
        return self.L_h

    @property
    def is_linear_gaussian(self) -> bool:
        return self.drift == "linear" and self.obs == "linear" and self.dim == 1
