import numpy as np
import pytest

from metricdrift.metric import (
    Constraint,
    LossConfig,
    MetricState,
    Regularizer,
    hinge_loss,
    identity_state,
    loss_subgradient,
    mahalanobis_sq,
    make_state,
    regularizer_value,
)

from _oracles import fd_hinge_gradient, random_psd, random_state


def c2(y, x, z, t=1):
    return Constraint(t, np.asarray(x, dtype=float), np.asarray(z, dtype=float), y)


class TestMahalanobis:
    def test_identity_unit_vector(self):
        s = identity_state(2)
        assert mahalanobis_sq(s, np.array([1.0, 0.0]), np.array([0.0, 0.0])) == 1.0

    def test_diagonal_ignores_null_direction(self):
        s = make_state(np.diag([2.0, 0.0]), 2.0)
        assert mahalanobis_sq(s, np.array([1.0, 1.0]), np.array([0.0, 0.0])) == 2.0

    def test_off_diagonal(self):
        # u = (1, -1): u'Mu = 2 + 2 - 1 - 1 = 2
        s = make_state(np.array([[2.0, 1.0], [1.0, 2.0]]), 2.0)
        assert mahalanobis_sq(s, np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(2.0, abs=1e-12)

    def test_symmetry_and_zero_at_equal_points(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            s = random_state(rng, 4)
            x, z = rng.normal(size=4), rng.normal(size=4)
            assert mahalanobis_sq(s, x, z) == mahalanobis_sq(s, z, x)
            assert mahalanobis_sq(s, x, x) == 0.0

    def test_nonnegative_on_random_psd(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            s = MetricState(random_psd(rng, 5), 2.0)
            x, z = rng.normal(size=5), rng.normal(size=5)
            assert mahalanobis_sq(s, x, z) >= 0.0

    def test_dimension_mismatch(self):
        s = identity_state(2)
        with pytest.raises(ValueError):
            mahalanobis_sq(s, np.zeros(3), np.zeros(3))
        with pytest.raises(ValueError):
            mahalanobis_sq(s, np.zeros(2), np.zeros(3))

    def test_nonfinite_input(self):
        s = identity_state(2)
        with pytest.raises(ValueError):
            mahalanobis_sq(s, np.array([np.nan, 0.0]), np.zeros(2))


class TestHinge:
    def test_inactive_similar(self):
        s = make_state(np.diag([0.5, 1.0]), 2.0)  # u'Mu = 0.5 <= mu - 1
        assert hinge_loss(s, c2(+1, [1, 0], [0, 0])) == 0.0

    def test_boundary_value_one(self):
        s = make_state(np.eye(2), 1.0)
        assert hinge_loss(s, c2(+1, [1, 0], [0, 0])) == 1.0

    def test_dissimilar_violation(self):
        s = make_state(np.diag([2.5, 1.0]), 2.0)  # d2 = 2.5 < mu + 1
        assert hinge_loss(s, c2(-1, [1, 0], [0, 0])) == 0.5

    def test_zero_iff_margin_satisfied(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            s = random_state(rng, 3)
            x, z = rng.normal(size=3), rng.normal(size=3)
            y = int(rng.choice([-1, 1]))
            c = c2(y, x, z)
            d2 = mahalanobis_sq(s, x, z)
            satisfied = d2 <= s.mu - 1 if y == 1 else d2 >= s.mu + 1
            assert (hinge_loss(s, c) == 0.0) == satisfied

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            hinge_loss(identity_state(3), c2(+1, [1, 0], [0, 0]))


class TestSubgradient:
    def test_inactive_gives_zero(self):
        s = make_state(np.diag([0.5, 1.0]), 2.0)
        gM, gmu = loss_subgradient(s, c2(+1, [1, 0], [0, 0]))
        assert np.all(gM == 0.0) and gmu == 0.0

    def test_active_rank_one(self):
        s = make_state(np.diag([2.5, 1.0]), 2.0)
        gM, gmu = loss_subgradient(s, c2(-1, [1, 0], [0, 0]))
        assert np.array_equal(gM, -np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert gmu == 1.0

    def test_kink_uses_zero_subgradient(self):
        # d2 = mu + 1 for a dissimilar pair sits exactly on the hinge kink
        s = make_state(np.diag([3.0, 1.0]), 2.0)
        c = c2(-1, [1, 0], [0, 0])
        assert hinge_loss(s, c) == 0.0
        gM, gmu = loss_subgradient(s, c)
        assert np.all(gM == 0.0) and gmu == 0.0

    def test_matches_finite_differences_away_from_kink(self):
        rng = np.random.default_rng(13)
        checked = 0
        while checked < 60:
            s = random_state(rng, 3)
            x, z = rng.normal(size=3), rng.normal(size=3)
            y = int(rng.choice([-1, 1]))
            c = c2(y, x, z)
            margin_gap = 1.0 - y * (s.mu - float(c.u @ s.M @ c.u))
            if abs(margin_gap) <= 1e-3:
                continue
            gM, gmu = loss_subgradient(s, c)
            fM, fmu = fd_hinge_gradient(s, c)
            scale = max(1.0, np.abs(fM).max())
            assert np.abs(gM - fM).max() <= 1e-5 * scale
            assert abs(gmu - fmu) <= 1e-5 * max(1.0, abs(fmu))
            checked += 1


class TestRegularizer:
    def test_nuclear_diagonal(self):
        cfg = LossConfig(0.1, Regularizer.NUCLEAR)
        assert regularizer_value(np.diag([3.0, 1.0, 0.2]), cfg) == pytest.approx(4.2, abs=1e-12)

    def test_zero_matrix(self):
        for reg in Regularizer:
            assert regularizer_value(np.zeros((3, 3)), LossConfig(0.0, reg)) == 0.0

    def test_l1_sums_absolute_entries(self):
        cfg = LossConfig(0.1, Regularizer.L1)
        assert regularizer_value(np.array([[1.0, -2.0], [-2.0, 1.0]]), cfg) == 6.0


class TestStateConstruction:
    def test_make_state_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            make_state(np.array([[1.0, 0.5], [0.0, 1.0]]), 2.0)

    def test_make_state_rejects_indefinite(self):
        with pytest.raises(ValueError):
            make_state(np.diag([1.0, -1.0]), 2.0)

    def test_make_state_rejects_mu_below_one(self):
        with pytest.raises(ValueError):
            make_state(np.eye(2), 0.5)

    def test_constraint_validation(self):
        with pytest.raises(ValueError):
            Constraint(1, np.zeros(2), np.zeros(3), 1)
        with pytest.raises(ValueError):
            Constraint(1, np.zeros(2), np.zeros(2), 0)
        with pytest.raises(ValueError):
            Constraint(0, np.zeros(2), np.zeros(2), 1)
        with pytest.raises(ValueError):
            Constraint(1, np.array([np.inf, 0.0]), np.zeros(2), 1)

    def test_states_are_frozen(self):
        s = identity_state(3)
        with pytest.raises(ValueError):
            s.M[0, 0] = 5.0
