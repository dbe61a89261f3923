"""Dyadic ensemble of mirror-descent learners with warm-started spawning.

Time is covered by intervals of length i0 * 2^j per level j, the first
interval at each level starting at t equal to its own length. One learner
lives on each interval with constant rate eta0 / sqrt(length). A learner
spawning at level j > 0 starts from the final state of the most recently
retired level j-1 learner, so it is already converged when its interval
begins; level-0 learners warm-start from their retired predecessor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .comid import ComidLearner, comid_step
from .metric import Constraint, LossConfig, MetricState, identity_state


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """Level-j interval [start, end] of length i0 * 2^j, in step units."""

    level: int
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def active_intervals(t: int, i0: int = 1, max_level: int | None = None) -> list[DyadicInterval]:
    """All dyadic intervals containing step t, sorted by level ascending.

    Level j is live once t reaches i0 * 2^j; with i0 > 1, time is bucketed
    into blocks of i0 steps and the dyadic grid laid over blocks.
    """
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    if i0 < 1:
        raise ValueError(f"base interval length must be >= 1, got {i0}")
    block = (t - 1) // i0 + 1
    out = []
    j = 0
    while (1 << j) <= block:
        if max_level is not None and j > max_level:
            break
        size = 1 << j
        k = block // size
        # blocks [k*size, (k+1)*size - 1], valid only from k >= 1
        if k >= 1:
            b_start = k * size
            b_end = (k + 1) * size - 1
            out.append(DyadicInterval(j, (b_start - 1) * i0 + 1, b_end * i0))
        j += 1
    return out


@dataclass
class RiceConfig:
    """Ensemble-wide knobs: grid base length, base rate, level cap, init."""

    eta0: float = 1.0
    i0: int = 1
    max_level: int = 14
    mu0: float = 2.0
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if not (np.isfinite(self.eta0) and self.eta0 > 0.0):
            raise ValueError(f"eta0 must be finite and > 0, got {self.eta0}")
        if self.i0 < 1:
            raise ValueError(f"i0 must be >= 1, got {self.i0}")
        if self.max_level < 0:
            raise ValueError(f"max_level must be >= 0, got {self.max_level}")
        if self.mu0 < 1.0:
            raise ValueError(f"mu0 must be >= 1, got {self.mu0}")


class RiceEnsemble:
    """Learner lifecycle and per-step fan-out. Step strictly sequentially."""

    def __init__(self, n: int, config: RiceConfig):
        self.n = n
        self.config = config
        self.active: dict[DyadicInterval, ComidLearner] = {}
        self.last_final: dict[int, MetricState] = {}
        self.next_t = 1

    def rate(self, interval: DyadicInterval) -> float:
        return self.config.eta0 / np.sqrt(interval.length)

    def _spawn_state(self, level: int) -> MetricState:
        if level == 0:
            prior = self.last_final.get(0)
            return prior if prior is not None else identity_state(self.n, self.config.mu0)
        parent_final = self.last_final.get(level - 1)
        if parent_final is not None:
            return parent_final
        # interval opened before any parent finished: borrow the parent's
        # current state, or fall back to the cold initializer
        for interval, learner in self.active.items():
            if interval.level == level - 1:
                return learner.state
        return identity_state(self.n, self.config.mu0)

    def step(self, t: int, c: Constraint) -> list[tuple[DyadicInterval, MetricState]]:
        """Retire ended learners, spawn new ones, update all on constraint c."""
        if t != self.next_t:
            raise ValueError(f"out-of-order step: expected t={self.next_t}, got {t}")
        now = active_intervals(t, self.config.i0, self.config.max_level)
        now_set = set(now)
        for interval in sorted(self.active):
            if interval not in now_set:
                self.last_final[interval.level] = self.active.pop(interval).state
        for interval in now:
            if interval not in self.active:
                self.active[interval] = ComidLearner(
                    self._spawn_state(interval.level), self.rate(interval), self.config.loss
                )
        outputs = []
        for interval in now:
            learner = comid_step(self.active[interval], c)
            self.active[interval] = learner
            outputs.append((interval, learner.state))
        self.next_t = t + 1
        return outputs

    def state_dict(self) -> dict:
        """JSON-ready snapshot (row-major matrix lists)."""
        return {
            "n": self.n,
            "next_t": self.next_t,
            "active": [
                {
                    "level": iv.level,
                    "start": iv.start,
                    "end": iv.end,
                    "M": lr.state.M.tolist(),
                    "mu": lr.state.mu,
                }
                for iv, lr in sorted(self.active.items())
            ],
            "last_final": {
                str(level): {"M": st.M.tolist(), "mu": st.mu}
                for level, st in sorted(self.last_final.items())
            },
        }

    @classmethod
    def from_state_dict(cls, payload: dict, config: RiceConfig) -> "RiceEnsemble":
        ens = cls(int(payload["n"]), config)
        ens.next_t = int(payload["next_t"])
        for item in payload["active"]:
            iv = DyadicInterval(int(item["level"]), int(item["start"]), int(item["end"]))
            state = _state_from_lists(item["M"], item["mu"], ens.n)
            ens.active[iv] = ComidLearner(state, ens.rate(iv), config.loss)
        for level, item in payload["last_final"].items():
            ens.last_final[int(level)] = _state_from_lists(item["M"], item["mu"], ens.n)
        return ens


def _state_from_lists(M_rows, mu, n: int) -> MetricState:
    M = np.asarray(M_rows, dtype=np.float64)
    if M.shape != (n, n):
        raise ValueError(f"checkpoint matrix shape {M.shape} does not match dimension {n}")
    M.flags.writeable = False
    return MetricState(M, float(mu))
