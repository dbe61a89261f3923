import numpy as np
import pytest

from metricdrift.comid import ComidLearner, comid_step, new_learner, prox_l1_psd, prox_nuclear_psd
from metricdrift.metric import (
    Constraint,
    LossConfig,
    MetricState,
    Regularizer,
    hinge_loss,
    loss_subgradient,
    make_state,
)

from _oracles import (
    cvx_l1_psd_prox,
    pg_comid_objective,
    pg_nuclear_prox,
    psd_project,
    random_psd,
    scalar_comid_objective,
)


def c2(y, x, z, t=1):
    return Constraint(t, np.asarray(x, dtype=float), np.asarray(z, dtype=float), y)


def random_symmetric(rng, n, scale=1.0):
    A = scale * rng.normal(size=(n, n))
    return 0.5 * (A + A.T)


class TestProxNuclear:
    def test_eigenvalue_shrinkage(self):
        rng = np.random.default_rng(3)
        V, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        G = (V * np.array([3.0, 1.0, 0.2])) @ V.T
        P = prox_nuclear_psd(G, 0.5)
        expected = (V * np.array([2.5, 0.5, 0.0])) @ V.T
        assert np.abs(P - expected).max() < 1e-12
        assert np.abs(P - pg_nuclear_prox(G, 0.5)).max() < 1e-8

    def test_tau_zero_is_identity_on_psd(self):
        rng = np.random.default_rng(4)
        G = random_psd(rng, 4)
        assert np.abs(prox_nuclear_psd(G, 0.0) - G).max() < 1e-12

    def test_tau_zero_projects_indefinite(self):
        P = prox_nuclear_psd(np.diag([1.0, -1.0]), 0.0)
        assert np.abs(P - np.diag([1.0, 0.0])).max() < 1e-14

    def test_matches_projected_gradient_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            G = random_symmetric(rng, 4, scale=2.0)
            tau = float(rng.choice([0.0, 0.1, 1.0]))
            ours = prox_nuclear_psd(G, tau)
            oracle = pg_nuclear_prox(G, tau)
            assert np.linalg.norm(ours - oracle) < 1e-6

    def test_nonexpansive(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            A = random_symmetric(rng, 4)
            B = random_symmetric(rng, 4)
            tau = float(rng.uniform(0, 1))
            lhs = np.linalg.norm(prox_nuclear_psd(A, tau) - prox_nuclear_psd(B, tau))
            assert lhs <= np.linalg.norm(A - B) + 1e-12

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            prox_nuclear_psd(np.array([[1.0, 0.2], [0.0, 1.0]]), 0.1)
        with pytest.raises(ValueError):
            prox_nuclear_psd(np.eye(2), -0.5)


class TestProxL1:
    def test_diagonal_case_exact(self):
        P = prox_l1_psd(np.diag([3.0, 1.0]), 0.5)
        assert np.abs(P - np.diag([2.5, 0.5])).max() < 1e-12
        oracle = cvx_l1_psd_prox(np.diag([3.0, 1.0]), 0.5)
        assert np.abs(oracle - np.diag([2.5, 0.5])).max() < 1e-8

    def test_tau_zero_is_identity_on_psd(self):
        rng = np.random.default_rng(9)
        G = random_psd(rng, 3)
        assert np.abs(prox_l1_psd(G, 0.0) - G).max() < 1e-12

    def test_threshold_already_psd(self):
        P = prox_l1_psd(np.array([[1.0, 0.3], [0.3, 1.0]]), 0.4)
        assert np.abs(P - np.diag([0.6, 0.6])).max() < 1e-12

    def test_two_stage_gap_is_bounded_not_hidden(self):
        # thresholding here breaks PSD, so the two-stage operator is only an
        # approximation of the joint prox; measure the gap against the exact
        # solve instead of pretending it is zero
        G = np.array([[1.0, 0.9], [0.9, -0.5]])
        tau = 0.2
        ours = prox_l1_psd(G, tau)
        exact = cvx_l1_psd_prox(G, tau, tol=1e-9)
        assert np.linalg.eigvalsh(ours)[0] >= -1e-12

        def objective(M):
            return 0.5 * np.sum((M - G) ** 2) + tau * np.abs(M).sum()

        gap = np.linalg.norm(ours - exact)
        assert 1e-6 < gap < 0.3
        assert objective(ours) <= 1.05 * objective(exact)


class TestComidStep:
    def test_inactive_hinge_is_identity(self):
        lr = new_learner(2, eta=0.5, cfg=LossConfig(0.0))
        c = c2(+1, [0.5, 0.0], [0.0, 0.0])  # d2 = 0.25 <= mu - 1
        out = comid_step(lr, c)
        assert np.array_equal(out.state.M, lr.state.M)
        assert out.state.mu == lr.state.mu

    def test_hand_derived_active_step(self):
        # dissimilar pair at d2 = 2.5 < mu + 1: grad_M = -uu', grad_mu = +1
        state = make_state(np.diag([2.5, 1.0]), 2.0)
        lr = ComidLearner(state, eta=0.5, cfg=LossConfig(0.0))
        out = comid_step(lr, c2(-1, [1, 0], [0, 0]))
        assert np.abs(out.state.M - np.diag([3.0, 1.0])).max() < 1e-12
        assert out.state.mu == 1.5
        # cross-check against numerical minimization of the step objective
        gM, gmu = loss_subgradient(state, c2(-1, [1, 0], [0, 0]))
        M_oracle = pg_comid_objective(state.M, gM, eta=0.5, rho=0.0)
        mu_oracle = scalar_comid_objective(state.mu, gmu, eta=0.5)
        assert np.linalg.norm(out.state.M - M_oracle) < 1e-6
        assert abs(out.state.mu - mu_oracle) < 1e-6

    def test_boundary_margin_is_a_no_op(self):
        # d2 = mu + 1 exactly: the kink subgradient is zero, so nothing moves
        state = make_state(np.diag([3.0, 1.0]), 2.0)
        lr = ComidLearner(state, eta=0.5, cfg=LossConfig(0.0))
        out = comid_step(lr, c2(-1, [1, 0], [0, 0]))
        assert np.array_equal(out.state.M, state.M)
        assert out.state.mu == 2.0

    def test_mu_clamped_at_one(self):
        # active dissimilar hinge (d2 = 2 < mu + 1) pushes mu down by eta
        state = make_state(np.diag([2.0, 1.0]), 1.2)
        lr = ComidLearner(state, eta=1.0, cfg=LossConfig(0.0))
        out = comid_step(lr, c2(-1, [1, 0], [0, 0]))
        assert out.state.mu == 1.0

    def test_matches_objective_minimizer_on_random_instances(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            state = MetricState(random_psd(rng, 3, scale=2.0), 1.0 + float(rng.uniform(0, 2)))
            c = c2(int(rng.choice([-1, 1])), rng.normal(size=3), rng.normal(size=3))
            eta = float(rng.uniform(0.05, 1.0))
            rho = float(rng.choice([0.0, 0.1, 1.0]))
            lr = ComidLearner(state, eta=eta, cfg=LossConfig(rho, Regularizer.NUCLEAR))
            out = comid_step(lr, c)
            gM, gmu = loss_subgradient(state, c)
            M_oracle = pg_comid_objective(state.M, gM, eta=eta, rho=rho)
            mu_oracle = scalar_comid_objective(state.mu, gmu, eta=eta)
            assert np.linalg.norm(out.state.M - M_oracle) < 1e-6
            assert abs(out.state.mu - mu_oracle) < 1e-6

    @pytest.mark.parametrize("reg", [Regularizer.NUCLEAR, Regularizer.L1])
    def test_invariants_hold_on_random_streams(self, reg):
        rng = np.random.default_rng(22)
        lr = new_learner(3, eta=0.3, cfg=LossConfig(0.05, reg))
        for t in range(1, 2001):
            c = c2(int(rng.choice([-1, 1])), rng.normal(size=3), rng.normal(size=3), t=t)
            lr = comid_step(lr, c)
            M = lr.state.M
            scale = max(1.0, np.linalg.norm(M))
            assert np.abs(M - M.T).max() <= 1e-12 * scale
            assert np.linalg.eigvalsh(M)[0] >= -1e-9 * scale
            assert lr.state.mu >= 1.0

    def test_dimension_mismatch_names_step(self):
        lr = new_learner(3, eta=0.5, cfg=LossConfig(0.0))
        with pytest.raises(ValueError, match="t=7"):
            comid_step(lr, c2(+1, [1, 0], [0, 0], t=7))

    def test_learner_requires_positive_rate(self):
        with pytest.raises(ValueError):
            new_learner(2, eta=0.0, cfg=LossConfig(0.0))
