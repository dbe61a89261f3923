import numpy as np
import pytest

from metricdrift.metric import Constraint, LossConfig
from metricdrift.rice import DyadicInterval, RiceConfig, RiceEnsemble, active_intervals


def c2(y, x, z, t):
    return Constraint(t, np.asarray(x, dtype=float), np.asarray(z, dtype=float), y)


def expected_spawns(t, i0=1):
    """Independent enumeration: level j starts at t iff the block index is a
    positive multiple of 2^j."""
    block = (t - 1) // i0 + 1
    if (t - 1) % i0 != 0:
        return []
    out = []
    j = 0
    while (1 << j) <= block:
        if block % (1 << j) == 0:
            out.append(j)
        j += 1
    return out


def expected_retires(t, i0=1):
    """Level j retires at t iff some interval [*, t-1] exists: (t-1) is the
    last step of a block b with (b+1) a multiple of 2^j and b >= 2^j."""
    if t == 1:
        return []
    prev_block = (t - 2) // i0 + 1
    if (t - 1) % i0 != 0:
        return []
    out = []
    j = 0
    while (1 << j) <= prev_block:
        if (prev_block + 1) % (1 << j) == 0:
            out.append(j)
        j += 1
    return out


class TestActiveIntervals:
    def test_first_step(self):
        assert active_intervals(1, 1) == [DyadicInterval(0, 1, 1)]

    def test_t4_three_levels(self):
        assert active_intervals(4, 1) == [
            DyadicInterval(0, 4, 4),
            DyadicInterval(1, 4, 5),
            DyadicInterval(2, 4, 7),
        ]

    def test_t3_two_levels(self):
        assert active_intervals(3, 1) == [
            DyadicInterval(0, 3, 3),
            DyadicInterval(1, 2, 3),
        ]

    def test_count_matches_log2_plus_one(self):
        for t in range(1, 1 << 12):
            assert len(active_intervals(t, 1)) == int(np.floor(np.log2(t))) + 1

    def test_levels_tile_without_gap_or_overlap(self):
        # at each level, consecutive t map to intervals that chain exactly
        horizon = 1 << 12
        seen = {}
        for t in range(1, horizon + 1):
            for iv in active_intervals(t, 1):
                assert iv.start <= t <= iv.end
                assert iv.length == 1 << iv.level
                assert iv.start % iv.length == 0
                prev = seen.get(iv.level)
                if prev is not None and prev != iv:
                    assert iv.start == prev.end + 1
                seen[iv.level] = iv
        for level, iv in seen.items():
            assert seen[level].start >= 1 << level

    def test_max_level_cap(self):
        assert all(iv.level <= 2 for iv in active_intervals(1 << 10, 1, max_level=2))

    def test_blocked_grid_for_i0(self):
        # i0 = 3: the dyadic grid lives on 3-step blocks; level 1 first covers
        # blocks [2, 3] = steps [4, 9]
        assert active_intervals(1, 3) == [DyadicInterval(0, 1, 3)]
        assert active_intervals(7, 3) == [DyadicInterval(0, 7, 9), DyadicInterval(1, 4, 9)]
        for t in range(1, 200):
            for iv in active_intervals(t, 3):
                assert iv.length == 3 * (1 << iv.level)
                block_start = (iv.start - 1) // 3 + 1
                assert block_start % (1 << iv.level) == 0

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            active_intervals(0, 1)
        with pytest.raises(ValueError):
            active_intervals(5, 0)


class TestEnsembleLifecycle:
    def make(self, eta0=0.5, i0=1, max_level=14):
        cfg = RiceConfig(eta0=eta0, i0=i0, max_level=max_level, mu0=2.0, loss=LossConfig(0.0))
        return RiceEnsemble(2, cfg)

    def test_first_step_single_learner(self):
        ens = self.make()
        out = ens.step(1, c2(+1, [0.1, 0.0], [0.0, 0.0], 1))
        assert [iv for iv, _ in out] == [DyadicInterval(0, 1, 1)]
        # inactive hinge: the fresh learner keeps its cold start
        assert np.array_equal(out[0][1].M, np.eye(2))
        assert out[0][1].mu == 2.0

    def test_retro_initialization_at_t2(self):
        ens = self.make()
        # active constraint moves the level-0 learner at t=1
        ens.step(1, c2(-1, [1.0, 0.0], [0.0, 0.0], 1))
        final_t1 = ens.last_final.get(0)
        assert final_t1 is None  # retires only at t=2
        s1 = ens.active[DyadicInterval(0, 1, 1)].state
        out = ens.step(2, c2(+1, [0.1, 0.0], [0.0, 0.0], 2))
        assert [iv for iv, _ in out] == [DyadicInterval(0, 2, 2), DyadicInterval(1, 2, 3)]
        # level-1 learner [2,3] spawned from the final state of [1,1]
        assert np.array_equal(ens.last_final[0].M, s1.M)
        assert np.array_equal(out[1][1].M, s1.M)  # inactive step preserved it
        assert out[1][1].mu == s1.mu

    def test_zero_gradient_stream_keeps_identity_everywhere(self):
        ens = self.make()
        for t in range(1, 65):
            out = ens.step(t, c2(+1, [0.1, 0.0], [0.0, 0.0], t))
            for _, state in out:
                assert np.array_equal(state.M, np.eye(2))
                assert state.mu == 2.0

    def test_spawn_retire_trace_matches_enumeration(self):
        ens = self.make()
        prev_active: set = set()
        for t in range(1, 65):
            out = ens.step(t, c2(+1, [0.1, 0.0], [0.0, 0.0], t))
            now = {iv for iv, _ in out}
            spawned = sorted(iv.level for iv in now - prev_active)
            retired = sorted(iv.level for iv in prev_active - now)
            assert spawned == expected_spawns(t), f"t={t}"
            assert retired == expected_retires(t), f"t={t}"
            prev_active = now

    def test_active_set_is_exact(self):
        ens = self.make(max_level=3)
        rng = np.random.default_rng(0)
        for t in range(1, 200):
            c = c2(int(rng.choice([-1, 1])), rng.normal(size=2), rng.normal(size=2), t)
            out = ens.step(t, c)
            assert [iv for iv, _ in out] == active_intervals(t, 1, 3)
            assert set(ens.active) == set(active_intervals(t, 1, 3))

    def test_rate_strictly_decreasing_in_level(self):
        ens = self.make(eta0=2.0)
        for t in (1, 7, 64, 555):
            ivs = active_intervals(t, 1, 14)
            rates = [ens.rate(iv) for iv in ivs]
            assert all(a > b for a, b in zip(rates, rates[1:]))
            assert rates[0] == 2.0 / np.sqrt(ivs[0].length)

    def test_spawned_states_satisfy_invariants(self):
        cfg = RiceConfig(eta0=0.4, i0=1, max_level=6, mu0=2.0, loss=LossConfig(0.02))
        ens = RiceEnsemble(3, cfg)
        rng = np.random.default_rng(1)
        for t in range(1, 300):
            c = c2(int(rng.choice([-1, 1])), rng.normal(size=3), rng.normal(size=3), t)
            for _, state in ens.step(t, c):
                state.validate()

    def test_determinism(self):
        def run():
            ens = self.make(eta0=0.7)
            rng = np.random.default_rng(42)
            trace = []
            for t in range(1, 120):
                c = c2(int(rng.choice([-1, 1])), rng.normal(size=2), rng.normal(size=2), t)
                trace.append([(iv, s.M.copy(), s.mu) for iv, s in ens.step(t, c)])
            return trace

        a, b = run(), run()
        for row_a, row_b in zip(a, b):
            for (iv_a, M_a, mu_a), (iv_b, M_b, mu_b) in zip(row_a, row_b):
                assert iv_a == iv_b and mu_a == mu_b
                assert np.array_equal(M_a, M_b)

    def test_out_of_order_step_rejected(self):
        ens = self.make()
        ens.step(1, c2(+1, [0.1, 0.0], [0.0, 0.0], 1))
        with pytest.raises(ValueError, match="out-of-order"):
            ens.step(3, c2(+1, [0.1, 0.0], [0.0, 0.0], 3))

    def test_state_dict_round_trip(self):
        ens = self.make(eta0=0.7)
        rng = np.random.default_rng(5)
        for t in range(1, 40):
            ens.step(t, c2(int(rng.choice([-1, 1])), rng.normal(size=2), rng.normal(size=2), t))
        clone = RiceEnsemble.from_state_dict(ens.state_dict(), ens.config)
        c = c2(-1, [1.0, 0.2], [0.0, 0.0], 40)
        out_a = ens.step(40, c)
        out_b = clone.step(40, c)
        for (iv_a, s_a), (iv_b, s_b) in zip(out_a, out_b):
            assert iv_a == iv_b
            assert np.array_equal(s_a.M, s_b.M) and s_a.mu == s_b.mu
