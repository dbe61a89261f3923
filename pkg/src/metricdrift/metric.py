"""Metric parameterization, margin hinge loss, subgradients, regularizers.

The learned parameter is the pair (M, mu): a PSD matrix M defining the
squared distance (x-z)' M (x-z) and a margin threshold mu >= 1. Similar
pairs (y=+1) should satisfy d2 <= mu-1, dissimilar pairs (y=-1) d2 >= mu+1;
violations are penalized by the hinge of the signed margin.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .backend import kernels

# Symmetry / PSD tolerances are relative to max(1, ||M||_F).
SYM_TOL = 1e-12
PSD_TOL = 1e-9


class Regularizer(str, enum.Enum):
    NUCLEAR = "nuclear"
    L1 = "l1"


@dataclass(frozen=True)
class LossConfig:
    """Regularization weight and choice of matrix regularizer."""

    rho: float = 0.0
    regularizer: Regularizer = Regularizer.NUCLEAR

    def __post_init__(self):
        object.__setattr__(self, "regularizer", Regularizer(self.regularizer))
        if not (np.isfinite(self.rho) and self.rho >= 0.0):
            raise ValueError(f"rho must be finite and >= 0, got {self.rho}")


def _readonly(a) -> np.ndarray:
    """Defensive frozen copy of caller-supplied data."""
    out = np.array(a, dtype=np.float64, order="C")
    out.flags.writeable = False
    return out


def _freeze_owned(a: np.ndarray) -> np.ndarray:
    """Freeze an array we own (fresh, contiguous float64); no copy."""
    if a.flags.writeable:
        a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MetricState:
    """Immutable (M, mu) pair. Supports + and scalar * for convex mixing."""

    M: np.ndarray
    mu: float

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    def __add__(self, other: "MetricState") -> "MetricState":
        return MetricState(self.M + other.M, self.mu + other.mu)

    def __rmul__(self, a: float) -> "MetricState":
        return MetricState(a * self.M, a * self.mu)

    def validate(self) -> None:
        check_state(self)


def make_state(M: np.ndarray, mu: float) -> MetricState:
    """Validated construction: symmetrize within tolerance, freeze the array."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"M must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)) or not np.isfinite(mu):
        raise ValueError("non-finite entries in metric state")
    scale = max(1.0, float(np.linalg.norm(M)))
    if np.abs(M - M.T).max() > SYM_TOL * scale:
        raise ValueError("M is not symmetric within tolerance")
    state = MetricState(_freeze_owned(0.5 * (M + M.T)), float(mu))
    check_state(state)
    return state


def identity_state(n: int, mu0: float = 2.0) -> MetricState:
    """Standard unbiased initializer (I_n, mu0)."""
    return make_state(np.eye(n), mu0)


def check_state(state: MetricState) -> None:
    """Raise unless M is symmetric PSD (within tolerance) and mu >= 1."""
    M = state.M
    scale = max(1.0, float(np.linalg.norm(M)))
    if np.abs(M - M.T).max() > SYM_TOL * scale:
        raise ValueError("M is not symmetric within tolerance")
    w = np.linalg.eigvalsh(M)
    if w[0] < -PSD_TOL * scale:
        raise ValueError(f"M is not PSD: min eigenvalue {w[0]:.3e}")
    if not state.mu >= 1.0:
        raise ValueError(f"mu must be >= 1, got {state.mu}")


@dataclass(frozen=True)
class Constraint:
    """Timestamped similarity triplet: points x, z and label y in {+1,-1}."""

    t: int
    x: np.ndarray
    z: np.ndarray
    y: int

    def __post_init__(self):
        x = _readonly(np.atleast_1d(self.x))
        z = _readonly(np.atleast_1d(self.z))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        if x.ndim != 1 or z.ndim != 1 or x.shape != z.shape:
            raise ValueError(f"x and z must be 1-D of equal length, got {x.shape} vs {z.shape}")
        if self.y not in (-1, 1):
            raise ValueError(f"y must be +1 or -1, got {self.y}")
        if self.t < 1:
            raise ValueError(f"step index must be >= 1, got {self.t}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise ValueError(f"non-finite point in constraint at t={self.t}")

    @cached_property
    def u(self) -> np.ndarray:
        """Difference vector x - z."""
        return _freeze_owned(self.x - self.z)


def _check_dims(state: MetricState, u: np.ndarray) -> None:
    if u.shape[0] != state.dim:
        raise ValueError(f"dimension mismatch: metric is {state.dim}-d, points are {u.shape[0]}-d")


def mahalanobis_sq(state: MetricState, x: np.ndarray, z: np.ndarray) -> float:
    """Squared distance (x-z)' M (x-z); tiny negative roundoff clamps to 0."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {z.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise ValueError("non-finite input point")
    u = x - z
    _check_dims(state, u)
    v = float(u @ state.M @ u)
    if v < 0.0:
        tol = PSD_TOL * max(1.0, float(np.linalg.norm(state.M)) * float(u @ u))
        if v < -tol:
            raise ValueError(f"negative squared distance {v:.3e} beyond PSD tolerance")
        v = 0.0
    return v


def hinge_loss(state: MetricState, c: Constraint) -> float:
    """Hinge of the signed margin: max(0, 1 - y*(mu - u'Mu))."""
    _check_dims(state, c.u)
    return float(kernels.hinge_loss_value(state.M, state.mu, c.u, float(c.y)))


def loss_subgradient(state: MetricState, c: Constraint) -> tuple[np.ndarray, float]:
    """Subgradient of hinge_loss in (M, mu).

    Inactive hinge (loss == 0, including the kink) gives zero; active gives
    (y*uu', -y), the minimal-norm choice at the kink.
    """
    _check_dims(state, c.u)
    if hinge_loss(state, c) > 0.0:
        return float(c.y) * np.outer(c.u, c.u), -float(c.y)
    return np.zeros((state.dim, state.dim)), 0.0


def regularizer_value(M: np.ndarray, cfg: LossConfig) -> float:
    """Nuclear norm (sum of |eigenvalues| for symmetric M) or elementwise L1."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"M must be square, got shape {M.shape}")
    if cfg.regularizer is Regularizer.NUCLEAR:
        return float(np.abs(np.linalg.eigvalsh(M)).sum())
    return float(np.abs(M).sum())


def composite_loss(state: MetricState, c: Constraint, cfg: LossConfig) -> float:
    """Full per-step objective f_t = hinge + rho * r(M)."""
    v = hinge_loss(state, c)
    if cfg.rho > 0.0:
        v += cfg.rho * regularizer_value(state.M, cfg)
    return v
