"""Evaluation: embeddings, leave-one-out k-NN, k-means + NMI, dynamic regret.

Everything here is a pure function of its inputs; the only randomness is the
explicit seed handed to k-means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .metric import Constraint, LossConfig, MetricState, composite_loss, make_state
from .rice import active_intervals


@dataclass(frozen=True)
class EmbeddingMap:
    """Linear map L (d, n) with L'L equal to M truncated to d eigendirections."""

    L: np.ndarray

    def transform(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.L.T


def embedding_from_metric(M: np.ndarray | MetricState, d: int) -> EmbeddingMap:
    """Top-d eigenpairs of M scaled into a map; full d recovers the metric exactly."""
    if isinstance(M, MetricState):
        M = M.M
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= {n}, got d={d}")
    w, V = np.linalg.eigh(M)
    w = np.maximum(w[::-1][:d], 0.0)  # descending, clamp eigen-noise
    V = V[:, ::-1][:, :d]
    return EmbeddingMap(np.sqrt(w)[:, None] * V.T)


def _as_embedding(metric) -> EmbeddingMap:
    if isinstance(metric, EmbeddingMap):
        return metric
    if isinstance(metric, MetricState):
        return embedding_from_metric(metric.M, metric.M.shape[0])
    M = np.asarray(metric, dtype=np.float64)
    return embedding_from_metric(M, M.shape[0])


def knn_error(metric, points: np.ndarray, labels: np.ndarray, k: int = 5) -> float:
    """Leave-one-out k-NN misclassification rate under the given metric.

    `metric` may be a matrix, a MetricState, or a prebuilt EmbeddingMap.
    Neighbor ties break by point index, vote ties toward the smallest label.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    n_pts = points.shape[0]
    if labels.shape[0] != n_pts:
        raise ValueError("points and labels disagree in length")
    if not 1 <= k < n_pts:
        raise ValueError(f"need 1 <= k < n_pts, got k={k}, n_pts={n_pts}")
    emb = _as_embedding(metric)
    Y = np.ascontiguousarray(emb.transform(points))
    n_classes = int(labels.max()) + 1
    return float(kernels.knn_loo_error(Y, labels, k, n_classes))


def kmeans(
    points: np.ndarray,
    n_clusters: int,
    seed,
    n_restarts: int = 10,
    max_iter: int = 300,
) -> np.ndarray:
    """Lloyd's with greedy D^2 seeding, best inertia over restarts.

    `seed` is an int or a Generator; identical seeds give identical
    partitions.
    """
    X = np.ascontiguousarray(points, dtype=np.float64)
    n_pts = X.shape[0]
    if n_clusters < 1:
        raise ValueError(f"n_clusters must be >= 1, got {n_clusters}")
    if n_clusters > n_pts:
        raise ValueError(f"n_clusters={n_clusters} exceeds n_pts={n_pts}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(n_restarts):
        centers = _dsquared_seeding(X, n_clusters, rng)
        labels, _, inertia = kernels.lloyd(X, centers, max_iter)
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    return best_labels


def _dsquared_seeding(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ style seeding: next center drawn with probability prop. to D^2."""
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    if K == 1:
        return centers
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0.0:
            centers[k] = X[int(rng.integers(n))]
            continue
        cdf = np.cumsum(d2) / total
        idx = int(np.searchsorted(cdf, rng.random(), side="right"))
        idx = min(idx, n - 1)
        centers[k] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[k]) ** 2, axis=1))
    return centers


def nmi(p1: np.ndarray, p2: np.ndarray) -> float:
    """Mutual information over the geometric mean of entropies, natural logs.

    Degenerate single-cluster partitions (zero entropy) score 0.
    """
    p1 = np.asarray(p1, dtype=np.int64)
    p2 = np.asarray(p2, dtype=np.int64)
    if p1.size == 0 or p1.shape != p2.shape:
        raise ValueError("partitions must be nonempty and equal-length")
    n = p1.size
    _, a = np.unique(p1, return_inverse=True)
    _, b = np.unique(p2, return_inverse=True)
    ka, kb = int(a.max()) + 1, int(b.max()) + 1
    joint = np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb) / n
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    ha = float(-np.sum(pa[pa > 0] * np.log(pa[pa > 0])))
    hb = float(-np.sum(pb[pb > 0] * np.log(pb[pb > 0])))
    if ha <= 0.0 or hb <= 0.0:
        return 0.0
    nz = joint > 0
    terms = joint[nz] * np.log(joint[nz] / np.outer(pa, pb)[nz])
    # summing in sorted order makes nmi(a, b) == nmi(b, a) exactly
    mi = float(np.sum(np.sort(terms)))
    return float(min(1.0, max(0.0, mi / np.sqrt(ha * hb))))


@dataclass(frozen=True)
class RegretLedger:
    """Per-step algorithm losses, comparator losses, comparator increments.

    increments[i] holds ||theta_{i+1} - theta_i|| of the comparator; the last
    entry is 0 so all three arrays share one length.
    """

    alg_losses: np.ndarray
    comp_losses: np.ndarray
    comp_increments: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alg_losses, dtype=np.float64)
        c = np.asarray(self.comp_losses, dtype=np.float64)
        g = np.asarray(self.comp_increments, dtype=np.float64)
        if not (a.shape == c.shape == g.shape and a.ndim == 1):
            raise ValueError("ledger arrays must be 1-D and equal-length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c)) and np.all(np.isfinite(g))):
            raise ValueError("ledger entries must be finite")
        for name, arr in (("alg_losses", a), ("comp_losses", c), ("comp_increments", g)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.alg_losses.shape[0]


def dynamic_regret(ledger: RegretLedger, q: int, s: int) -> tuple[float, float]:
    """Loss gap and comparator path length over steps [q, s] (1-based, inclusive)."""
    if not 1 <= q <= s <= len(ledger):
        raise ValueError(f"bad interval [{q}, {s}] for ledger of length {len(ledger)}")
    lo, hi = q - 1, s
    regret = float(np.sum(ledger.alg_losses[lo:hi] - ledger.comp_losses[lo:hi]))
    path = float(np.sum(ledger.comp_increments[lo : hi - 1]))
    return regret, path


def dyadic_regret_sweep(ledger: RegretLedger, i0: int = 1) -> dict:
    """dynamic_regret over every dyadic subinterval inside the ledger.

    Strong-adaptivity diagnostic: the returned map lets callers check regret
    growth on all scales simultaneously, keyed by (level, start, end).
    """
    T = len(ledger)
    out = {}
    for t in range(1, T + 1):
        for iv in active_intervals(t, i0):
            key = (iv.level, iv.start, iv.end)
            if key not in out and iv.end <= T:
                out[key] = dynamic_regret(ledger, iv.start, iv.end)
    return out


def batch_objective(M: np.ndarray, mu: float, U: np.ndarray, Y: np.ndarray, cfg: LossConfig) -> float:
    """Mean hinge + rho * r(M) over a logged stream given as difference
    vectors U (T, n) and labels Y (T,)."""
    d2 = np.einsum("ij,jk,ik->i", U, M, U)
    val = float(np.maximum(0.0, 1.0 - Y * (mu - d2)).mean())
    if cfg.rho > 0.0:
        if cfg.regularizer.value == "nuclear":
            reg = float(np.abs(np.linalg.eigvalsh(M)).sum())
        else:
            reg = float(np.abs(M).sum())
        val += cfg.rho * reg
    return val


def best_fixed_state(
    constraints,
    cfg: LossConfig,
    mu_max: float = 50.0,
    iters: int = 8000,
    batch: int = 384,
    radii=(0.5, 2.0, 8.0, 32.0),
    seed: int = 0,
) -> MetricState:
    """Post-hoc batch minimizer of the mean objective over one logged stream.

    Normalized-step stochastic subgradient descent over the PSD cone and
    {mu >= 1}, swept over step radii with tail averaging; the best
    full-objective candidate wins. Used as the fixed comparator for
    static-regret measurements. `constraints` is a list of Constraint or a
    precomputed (U, Y) pair.
    """
    if isinstance(constraints, tuple):
        U, Y = constraints
    else:
        if not constraints:
            raise ValueError("empty constraint stream")
        U = np.stack([c.u for c in constraints])
        Y = np.asarray([float(c.y) for c in constraints])
    T, n = U.shape
    batch = min(batch, T)
    rng = np.random.default_rng(seed)
    eye = np.eye(n)
    best, best_val = (eye, 2.0), batch_objective(eye, 2.0, U, Y, cfg)
    for R in radii:
        M = np.eye(n)
        mu = 2.0
        acc_M = np.zeros((n, n))
        acc_mu = 0.0
        acc_n = 0
        for k in range(1, iters + 1):
            idx = rng.integers(0, T, size=batch)
            Ub, Yb = U[idx], Y[idx]
            d2 = np.einsum("ij,jk,ik->i", Ub, M, Ub)
            act = (1.0 - Yb * (mu - d2)) > 0
            gM = np.zeros((n, n))
            gmu = 0.0
            if act.any():
                w = Yb[act] / batch
                gM = np.einsum("i,ij,ik->jk", w, Ub[act], Ub[act])
                gmu = float(-w.sum())
            if cfg.rho > 0.0:
                gM = gM + cfg.rho * (eye if cfg.regularizer.value == "nuclear" else np.sign(M))
            gn = np.sqrt(np.sum(gM * gM) + gmu * gmu)
            if gn == 0.0:
                continue
            step = R / (np.sqrt(k) * gn)
            Mn = M - step * gM
            w_eig, V = np.linalg.eigh(0.5 * (Mn + Mn.T))
            M = (V * np.maximum(w_eig, 0.0)) @ V.T
            mu = float(np.clip(mu - step * gmu, 1.0, mu_max))
            if k > iters // 2:
                acc_M += M
                acc_mu += mu
                acc_n += 1
        for cand_M, cand_mu in ((M, mu), (acc_M / acc_n, acc_mu / acc_n)):
            cand_M = 0.5 * (cand_M + cand_M.T)
            val = batch_objective(cand_M, cand_mu, U, Y, cfg)
            if val < best_val:
                best_val = val
                best = (cand_M.copy(), cand_mu)
    return make_state(best[0], best[1])


def ledger_for_fixed_comparator(
    per_step_alg_losses: np.ndarray,
    constraints: list[Constraint],
    comparator: MetricState,
    cfg: LossConfig,
) -> RegretLedger:
    """Ledger against one fixed comparator state (zero path length)."""
    comp = np.asarray([composite_loss(comparator, c, cfg) for c in constraints])
    zeros = np.zeros_like(comp)
    return RegretLedger(np.asarray(per_step_alg_losses, dtype=np.float64), comp, zeros)
