"""Synthetic nonstationary constraint streams.

A dataset carries two independent clusterings living in disjoint coordinate
subspaces (Gaussian blobs there, iid noise elsewhere). A scenario is a
piecewise schedule of (duration, active partition, rotation rate): each step
optionally applies a small random rotation to every point, then emits one
similar/dissimilar constraint labeled under the active partition, plus a
ground-truth snapshot for evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .metric import Constraint, _freeze_owned

PARTITIONS = ("a", "b")


@dataclass(frozen=True)
class SyntheticDataset:
    """Points (n_pts, n) with cluster ids under partitions A and B."""

    points: np.ndarray
    labels_a: np.ndarray
    labels_b: np.ndarray
    k_sub: int

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def n_pts(self) -> int:
        return self.points.shape[0]

    def labels(self, partition: str) -> np.ndarray:
        if partition == "a":
            return self.labels_a
        if partition == "b":
            return self.labels_b
        raise ValueError(f"partition must be one of {PARTITIONS}, got {partition!r}")

    def subspace_projector(self, partition: str) -> np.ndarray:
        """Projector onto the coordinate block the partition was generated in."""
        P = np.zeros((self.n, self.n))
        lo = 0 if partition == "a" else self.k_sub
        for i in range(lo, lo + self.k_sub):
            P[i, i] = 1.0
        return P


@dataclass(frozen=True)
class DriftSegment:
    steps: int
    partition: str
    rate: float

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"segment duration must be >= 1, got {self.steps}")
        if self.partition not in PARTITIONS:
            raise ValueError(f"partition must be one of {PARTITIONS}, got {self.partition!r}")
        if not (np.isfinite(self.rate) and self.rate >= 0.0):
            raise ValueError(f"drift rate must be finite and >= 0, got {self.rate}")


@dataclass(frozen=True)
class DriftScenario:
    segments: tuple[DriftSegment, ...]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("scenario needs at least one segment")

    @property
    def total_steps(self) -> int:
        return sum(s.steps for s in self.segments)


def _label_vector(n_pts: int, proportions, rng: np.random.Generator) -> np.ndarray:
    """Cluster ids hitting the proportions within rounding, in random order."""
    proportions = np.asarray(proportions, dtype=np.float64)
    if proportions.ndim != 1 or proportions.size < 1:
        raise ValueError("proportions must be a non-empty 1-D sequence")
    if np.any(proportions <= 0) or abs(proportions.sum() - 1.0) > 1e-9:
        raise ValueError(f"proportions must be positive and sum to 1, got {proportions}")
    counts = np.floor(proportions * n_pts).astype(int)
    # distribute the rounding remainder to the largest fractional parts
    order = np.argsort(-(proportions * n_pts - counts), kind="stable")
    for i in range(n_pts - counts.sum()):
        counts[order[i % len(counts)]] += 1
    labels = np.repeat(np.arange(len(counts)), counts)
    rng.shuffle(labels)
    return labels


def _blob_centers(n_clusters: int, k_sub: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    if n_clusters <= k_sub:
        return scale * np.eye(k_sub)[:n_clusters]
    extra = rng.normal(size=(n_clusters - k_sub, k_sub))
    extra = scale * extra / np.linalg.norm(extra, axis=1, keepdims=True)
    return np.vstack([scale * np.eye(k_sub), extra])


def generate_dataset(
    n_pts: int,
    n: int,
    k_sub: int,
    proportions_a,
    proportions_b,
    blob_scale: float = 1.0,
    noise_scale: float = 1.0,
    seed: int = 0,
    center_scale: float = 6.0,
) -> SyntheticDataset:
    """Two independent clusterings in disjoint k_sub-dim coordinate blocks.

    Partition A structures coordinates [0, k_sub), B structures
    [k_sub, 2*k_sub); the remaining n - 2*k_sub coordinates are iid noise.
    """
    if 2 * k_sub > n:
        raise ValueError(f"need 2*k_sub <= n, got k_sub={k_sub}, n={n}")
    if n_pts < 2:
        raise ValueError(f"need at least two points, got {n_pts}")
    rng = np.random.default_rng(seed)
    labels_a = _label_vector(n_pts, proportions_a, rng)
    labels_b = _label_vector(n_pts, proportions_b, rng)
    centers_a = _blob_centers(int(labels_a.max()) + 1, k_sub, center_scale, rng)
    centers_b = _blob_centers(int(labels_b.max()) + 1, k_sub, center_scale, rng)
    points = np.empty((n_pts, n))
    points[:, :k_sub] = centers_a[labels_a] + blob_scale * rng.normal(size=(n_pts, k_sub))
    points[:, k_sub : 2 * k_sub] = centers_b[labels_b] + blob_scale * rng.normal(size=(n_pts, k_sub))
    points[:, 2 * k_sub :] = noise_scale * rng.normal(size=(n_pts, n - 2 * k_sub))
    labels_a.flags.writeable = False
    labels_b.flags.writeable = False
    return SyntheticDataset(_freeze_owned(points), labels_a, labels_b, k_sub)


def skew_rotation(K: np.ndarray, epsilon: float) -> np.ndarray:
    """Orthogonal exp(epsilon * K) for skew-symmetric K."""
    K = np.asarray(K, dtype=np.float64)
    if np.abs(K + K.T).max() > 1e-12 * max(1.0, float(np.linalg.norm(K))):
        raise ValueError("generator must be skew-symmetric")
    if epsilon == 0.0:
        return np.eye(K.shape[0])
    return expm(epsilon * K)


def random_skew_generator(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random skew-symmetric matrix with unit Frobenius norm."""
    A = rng.normal(size=(n, n))
    K = A - A.T
    return K / np.linalg.norm(K)


def rotation_step(points: np.ndarray, epsilon: float, rng: np.random.Generator):
    """Rotate every point by a random small rotation; returns (points, G)."""
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    n = points.shape[1]
    if epsilon == 0.0:
        return points, np.eye(n)
    G = skew_rotation(random_skew_generator(n, rng), epsilon)
    return _freeze_owned(points @ G.T), G


def sample_constraint(
    points: np.ndarray,
    labels: np.ndarray,
    t: int,
    rng: np.random.Generator,
    balanced: bool = True,
) -> Constraint:
    """Random pair of distinct points labeled +1 if co-clustered else -1.

    Balanced mode first flips a fair coin for the target label, then redraws
    pairs until one matches; otherwise pairs are uniform.
    """
    n_pts = points.shape[0]
    if n_pts < 2:
        raise ValueError("need at least two points to form a pair")
    want_same = bool(rng.integers(2)) if balanced else None
    while True:
        i, j = rng.choice(n_pts, size=2, replace=False)
        same = labels[i] == labels[j]
        if want_same is None or same == want_same:
            return Constraint(t, points[i], points[j], 1 if same else -1)


@dataclass(frozen=True)
class Snapshot:
    """Ground truth at one step, for evaluation and comparator sequences."""

    t: int
    points: np.ndarray
    partition: str
    labels: np.ndarray
    rotation: np.ndarray
    gt_metric: np.ndarray
    gt_change: float


class ScenarioStream:
    """Sequential generator of (Constraint, Snapshot) pairs for one scenario.

    Owns two RNG streams (rotations, pair sampling) derived from the scenario
    seed, so a replayed run that skips pair sampling still sees identical
    rotations. Checkpointable via state_dict / load_state_dict.
    """

    def __init__(
        self,
        data: SyntheticDataset,
        scenario: DriftScenario,
        balanced: bool = True,
        comparator_mu: float = 2.0,
    ):
        self.data = data
        self.scenario = scenario
        self.balanced = balanced
        self.comparator_mu = comparator_mu
        seq = np.random.SeedSequence(scenario.seed)
        rot_seed, pair_seed, scale_seed = seq.spawn(3)
        self.rotation_rng = np.random.default_rng(rot_seed)
        self.pairing_rng = np.random.default_rng(pair_seed)
        self._scales = {
            p: self._margin_scale(p, np.random.default_rng(scale_seed.spawn(1)[0]))
            for p in PARTITIONS
        }
        self.points = data.points
        self.rotation = np.eye(data.n)
        self.t = 0
        self._seg_idx = 0
        self._seg_pos = 0
        self._prev_gt = self._gt_metric(self.scenario.segments[0].partition)

    def _margin_scale(self, partition: str, rng: np.random.Generator) -> float:
        """Scale c putting the mean projected pair distances astride the margin."""
        P = self.data.subspace_projector(partition)
        labels = self.data.labels(partition)
        idx = rng.integers(0, self.data.n_pts, size=(4000, 2))
        idx = idx[idx[:, 0] != idx[:, 1]]
        diffs = self.data.points[idx[:, 0]] - self.data.points[idx[:, 1]]
        d2 = np.einsum("ij,ij->i", diffs @ P, diffs)
        same = labels[idx[:, 0]] == labels[idx[:, 1]]
        if not same.any() or same.all():
            return 1.0
        s_bar = float(d2[same].mean())
        d_bar = float(d2[~same].mean())
        return 2.0 * self.comparator_mu / (s_bar + d_bar)

    def _gt_metric(self, partition: str) -> np.ndarray:
        P = self.data.subspace_projector(partition)
        M = self._scales[partition] * (self.rotation @ P @ self.rotation.T)
        return 0.5 * (M + M.T)

    @property
    def total_steps(self) -> int:
        return self.scenario.total_steps

    def step(self, external: Constraint | None = None) -> tuple[Constraint, Snapshot]:
        """Advance one step; `external` substitutes the sampled constraint."""
        if self.t >= self.scenario.total_steps:
            raise StopIteration
        seg = self.scenario.segments[self._seg_idx]
        self.t += 1
        if seg.rate > 0.0:
            self.points, G = rotation_step(self.points, seg.rate, self.rotation_rng)
            self.rotation = G @ self.rotation
        labels = self.data.labels(seg.partition)
        if external is None:
            c = sample_constraint(self.points, labels, self.t, self.pairing_rng, self.balanced)
        else:
            if external.x.shape[0] != self.data.n:
                raise ValueError(
                    f"replayed constraint at t={self.t} has dimension "
                    f"{external.x.shape[0]}, scenario is {self.data.n}-d"
                )
            c = external
        gt = self._gt_metric(seg.partition)
        denom = max(np.linalg.norm(self._prev_gt), 1e-300)
        change = float(np.linalg.norm(gt - self._prev_gt) / denom)
        self._prev_gt = gt
        snap = Snapshot(self.t, self.points, seg.partition, labels, self.rotation, gt, change)
        self._seg_pos += 1
        if self._seg_pos >= seg.steps:
            self._seg_idx += 1
            self._seg_pos = 0
        return c, snap

    def __iter__(self):
        while self.t < self.scenario.total_steps:
            yield self.step()

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "seg_idx": self._seg_idx,
            "seg_pos": self._seg_pos,
            "points": self.points.tolist(),
            "rotation": self.rotation.tolist(),
            "prev_gt": self._prev_gt.tolist(),
            "rotation_rng": self.rotation_rng.bit_generator.state,
            "pairing_rng": self.pairing_rng.bit_generator.state,
        }

    def load_state_dict(self, payload: dict) -> None:
        points = np.asarray(payload["points"], dtype=np.float64)
        if points.shape != self.data.points.shape:
            raise ValueError(f"checkpoint points shape {points.shape} does not match dataset")
        self.t = int(payload["t"])
        self._seg_idx = int(payload["seg_idx"])
        self._seg_pos = int(payload["seg_pos"])
        self.points = _freeze_owned(points)
        self.rotation = np.asarray(payload["rotation"], dtype=np.float64)
        self._prev_gt = np.asarray(payload["prev_gt"], dtype=np.float64)
        self.rotation_rng.bit_generator.state = payload["rotation_rng"]
        self.pairing_rng.bit_generator.state = payload["pairing_rng"]
