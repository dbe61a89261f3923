"""One online proximal mirror-descent learner for the metric pair (M, mu).

Per constraint: a subgradient step on the hinge in the squared-Frobenius
geometry, then the exact prox of eta*rho*r(M) restricted to the PSD cone
(eigenvalue soft-threshold for the nuclear norm; entrywise threshold then
PSD projection for L1), and a clamp of mu onto {mu >= 1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .metric import (
    Constraint,
    LossConfig,
    MetricState,
    Regularizer,
    _freeze_owned,
    identity_state,
)


class StepFailure(RuntimeError):
    """Numerical failure inside a learner step; carries the step index."""

    def __init__(self, t: int, msg: str):
        super().__init__(f"step t={t}: {msg}")
        self.t = t


@dataclass(frozen=True)
class ComidLearner:
    """Immutable learner value: current state, fixed rate, loss config."""

    state: MetricState
    eta: float
    cfg: LossConfig

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0.0):
            raise ValueError(f"eta must be finite and > 0, got {self.eta}")


def new_learner(n: int, eta: float, cfg: LossConfig, mu0: float = 2.0) -> ComidLearner:
    return ComidLearner(identity_state(n, mu0), eta, cfg)


def _check_symmetric(G: np.ndarray) -> np.ndarray:
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {G.shape}")
    scale = max(1.0, float(np.linalg.norm(G)))
    if np.abs(G - G.T).max() > 1e-9 * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return np.ascontiguousarray(G)


def prox_nuclear_psd(G: np.ndarray, tau: float) -> np.ndarray:
    """argmin over M >= 0 of 0.5||M-G||_F^2 + tau ||M||_*.

    On the PSD cone this is eigenvalue soft-thresholding: shift the spectrum
    down by tau and clamp negatives to zero, keeping G's eigenvectors.
    """
    G = _check_symmetric(G)
    if tau < 0.0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return kernels.prox_nuclear_psd(G, float(tau))


def prox_l1_psd(G: np.ndarray, tau: float) -> np.ndarray:
    """Entrywise soft-threshold at tau followed by projection onto the PSD cone.

    Two-stage approximation of the joint prox; exact whenever the thresholded
    matrix is already PSD (e.g. diagonal G).
    """
    G = _check_symmetric(G)
    if tau < 0.0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return kernels.prox_l1_psd(G, float(tau))


def comid_step(learner: ComidLearner, c: Constraint) -> ComidLearner:
    """Advance one constraint; returns the updated learner.

    With zero subgradient and rho == 0 the state is returned unchanged.
    """
    state = learner.state
    u = c.u
    if u.shape[0] != state.dim:
        raise ValueError(
            f"dimension mismatch at t={c.t}: metric is {state.dim}-d, constraint is {u.shape[0]}-d"
        )
    tau = learner.eta * learner.cfg.rho
    reg_code = 0 if learner.cfg.regularizer is Regularizer.NUCLEAR else 1
    try:
        M_new, mu_new, _ = kernels.comid_update(
            state.M, state.mu, u, float(c.y), learner.eta, tau, reg_code
        )
    except np.linalg.LinAlgError as e:
        raise StepFailure(c.t, f"eigendecomposition failed: {e}") from e
    if M_new is state.M and mu_new == state.mu:
        return learner
    if not np.all(np.isfinite(M_new)):
        raise StepFailure(c.t, "non-finite update")
    return ComidLearner(MetricState(_freeze_owned(M_new), float(mu_new)), learner.eta, learner.cfg)
