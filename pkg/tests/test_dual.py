import numpy as np
import pytest
import scipy.optimize

from conftest import make_problem
from selcon.dataset import Dataset, partition_validation
from selcon.dual import (
    TrainerConfig,
    dual_objective,
    primal_value,
    solve_inner_linear,
    train_dual_exact,
    train_dual_sgd,
)
from selcon.errors import SingularSystem
from selcon.models import LinearModel, loss_grad

CFG = TrainerConfig()


def scalar_oracle(subset, train, vp, lam, C):
    """Independent maximization of the single-multiplier dual."""

    def phi(m):
        w = solve_inner_linear(np.array([m]), subset, train, vp, lam)
        return dual_objective(w, np.array([m]), subset, train, vp, lam)

    res = scipy.optimize.minimize_scalar(
        lambda m: -phi(m), bounds=(0.0, C), method="bounded", options={"xatol": 1e-13}
    )
    return max(-res.fun, phi(0.0), phi(C))


class TestDualObjective:
    def test_direct_substitution(self):
        train = Dataset(features=np.array([[1.0]]), targets=np.array([1.0]))
        val = Dataset(features=np.array([[1.0]]), targets=np.array([3.0]))
        vp = partition_validation(val, "single", delta=1.0)
        value = dual_objective(LinearModel(w=np.zeros(1)), np.array([2.0]), [0], train, vp, 1.0)
        assert value == pytest.approx(17.0)

    def test_zero_mu_is_ridge_sum(self):
        train, _, vp, lam, _ = make_problem(0, n=5)
        w = LinearModel(w=np.array([0.3, -0.2]))
        subset = [0, 2, 3]
        got = dual_objective(w, np.zeros(1), subset, train, vp, lam)
        resid = train.targets[subset] - train.features[subset] @ w.w
        want = len(subset) * lam * float(w.w @ w.w) + float(resid @ resid)
        assert got == pytest.approx(want, rel=1e-12)

    def test_empty_subset(self):
        train, _, vp, lam, C = make_problem(1, delta=0.25)
        val_y = vp.data.targets
        got = dual_objective(LinearModel(w=np.zeros(2)), np.array([C]), [], train, vp, lam)
        assert got == pytest.approx(C * (np.mean(val_y**2) - 0.25), rel=1e-12)

    def test_regularizer_counts_per_element(self):
        # Duplicating an index doubles the lam*||w||^2 contribution.
        train, _, vp, lam, _ = make_problem(2)
        w = LinearModel(w=np.array([0.5, 0.1]))
        mu = np.zeros(1)
        single = dual_objective(w, mu, [1], train, vp, lam)
        doubled = dual_objective(w, mu, [1, 1], train, vp, lam)
        assert doubled - single == pytest.approx(single, rel=1e-12)


class TestSolveInner:
    def test_claim_closed_form(self):
        # lam=1, x=[1], y=2: w = [1] and the optimal value is 2.
        train = Dataset(features=np.array([[1.0]]), targets=np.array([2.0]))
        val = Dataset(features=np.array([[1.0]]), targets=np.array([1.0]))
        vp = partition_validation(val, "single", delta=0.5)
        w = solve_inner_linear(np.zeros(1), [0], train, vp, 1.0)
        assert w.w == pytest.approx([1.0])
        value = dual_objective(w, np.zeros(1), [0], train, vp, 1.0)
        assert value == pytest.approx(2.0)

    def test_stationarity(self):
        for seed in range(10):
            train, _, vp, lam, C = make_problem(seed, n=7, q=1 + seed % 2)
            rng = np.random.default_rng(seed)
            mu = rng.uniform(0, C, vp.q)
            subset = sorted(rng.choice(7, size=3, replace=False))
            model = solve_inner_linear(mu, subset, train, vp, lam)
            # Assemble the objective gradient from per-point loss gradients.
            grad = 2.0 * lam * len(subset) * model.w
            for i in subset:
                grad += loss_grad(model, train.features[i], train.targets[i])
            for q, rows in enumerate(vp.subsets):
                for j in rows:
                    grad += (
                        mu[q]
                        / len(rows)
                        * loss_grad(model, vp.data.features[j], vp.data.targets[j])
                    )
            assert np.linalg.norm(grad) <= 1e-8

    def test_degenerate_case(self):
        train, _, vp, lam, _ = make_problem(3)
        with pytest.raises(SingularSystem):
            solve_inner_linear(np.zeros(1), [], train, vp, lam)
        w = solve_inner_linear(np.zeros(1), [], train, vp, lam, allow_degenerate=True)
        assert np.array_equal(w.w, np.zeros(2))


class TestExactTrainer:
    def test_C_zero_gives_ridge(self):
        train, _, vp, lam, _ = make_problem(4, n=6)
        subset = [0, 2, 5]
        st = train_dual_exact(subset, train, vp, lam, 0.0, CFG)
        assert np.array_equal(st.mu, [0.0])
        ridge = solve_inner_linear(np.zeros(1), subset, train, vp, lam)
        assert st.f_value == pytest.approx(
            dual_objective(ridge, np.zeros(1), subset, train, vp, lam), rel=1e-12
        )

    def test_slack_constraint_keeps_mu_zero(self):
        # Huge delta: the unconstrained ridge fit already satisfies it.
        train, _, vp, lam, C = make_problem(5, delta=50.0)
        st = train_dual_exact([0, 1, 2], train, vp, lam, C, CFG)
        assert np.array_equal(st.mu, [0.0])
        assert st.converged

    def test_tight_constraint_activates_mu(self):
        train, _, vp, lam, _ = make_problem(6, delta=0.0)
        st = train_dual_exact([0, 1], train, vp, lam, 100.0, CFG)
        assert st.mu[0] > 0

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_scalar_oracle(self, seed):
        train, _, vp, lam, C = make_problem(seed, n=7, signed=True)
        subset = sorted(np.random.default_rng(seed).choice(7, size=2 + seed % 3, replace=False))
        st = train_dual_exact(subset, train, vp, lam, C, CFG)
        assert st.f_value == pytest.approx(scalar_oracle(subset, train, vp, lam, C), abs=1e-9)

    def test_mu_inside_box(self):
        for seed in range(12):
            train, _, vp, lam, C = make_problem(seed, q=1 + seed % 2, delta=0.0)
            st = train_dual_exact([0, 1], train, vp, lam, C, CFG)
            assert np.all(st.mu >= 0.0) and np.all(st.mu <= C)

    def test_saddle_inequalities(self):
        for seed in range(6):
            train, _, vp, lam, C = make_problem(seed, q=2, delta=0.1)
            subset = [0, 2, 4]
            st = train_dual_exact(subset, train, vp, lam, C, CFG)
            rng = np.random.default_rng(seed)
            f_star = st.f_value
            for _ in range(20):
                mu = rng.uniform(0, C, vp.q)
                # F(w*, mu) <= F(w*, mu*) for any box mu
                assert dual_objective(st.model, mu, subset, train, vp, lam) <= f_star + 1e-7
                w = LinearModel(w=st.model.w + rng.normal(0, 0.3, train.d))
                # F(w, mu*) >= F(w*, mu*) for any w
                assert dual_objective(w, st.mu, subset, train, vp, lam) >= f_star - 1e-7

    def test_norm_bound_over_box(self):
        # Trained parameters stay inside the closed-form norm bound.
        for seed in range(10):
            train, _, vp, lam, C = make_problem(seed, q=1 + seed % 2)
            rng = np.random.default_rng(100 + seed)
            y_all = np.concatenate([train.targets, vp.data.targets])
            x_all = np.vstack([train.features, vp.data.features])
            bound = (
                (1 + C * vp.q)
                * np.max(np.abs(y_all))
                * np.max(np.linalg.norm(x_all, axis=1))
                / lam
            )
            for _ in range(10):
                mu = rng.uniform(0, C, vp.q)
                subset = sorted(rng.choice(train.n, size=1 + int(rng.integers(3)), replace=False))
                w = solve_inner_linear(mu, subset, train, vp, lam)
                assert np.linalg.norm(w.w) <= bound + 1e-9

    def test_empty_subset_q2_matches_grid(self):
        train, _, vp, lam, C = make_problem(8, q=2, delta=0.02)
        st = train_dual_exact([], train, vp, lam, C, CFG)
        best = 0.0
        for m1 in np.linspace(0, C, 61):
            for m2 in np.linspace(0, C, 61):
                if m1 == 0 and m2 == 0:
                    continue
                mu = np.array([m1, m2])
                w = solve_inner_linear(mu, [], train, vp, lam)
                best = max(best, dual_objective(w, mu, [], train, vp, lam))
        assert st.f_value >= best - 1e-9
        assert st.f_value == pytest.approx(best, abs=1e-4)


class TestSgdTrainer:
    def test_deterministic(self):
        train, _, vp, lam, C = make_problem(9)
        a = train_dual_sgd([0, 2, 4], train, vp, lam, C, CFG)
        b = train_dual_sgd([0, 2, 4], train, vp, lam, C, CFG)
        assert a.f_value == b.f_value
        assert np.array_equal(a.params, b.params)
        assert np.array_equal(a.mu, b.mu)

    @pytest.mark.parametrize("seed", range(4))
    def test_close_to_exact(self, seed):
        train, _, vp, lam, C = make_problem(seed, n=6)
        for subset in ([1], [0, 3, 5]):
            exact = train_dual_exact(subset, train, vp, lam, C, CFG)
            approx = train_dual_sgd(subset, train, vp, lam, C, CFG)
            assert abs(approx.f_value - exact.f_value) <= 0.01 * abs(exact.f_value)

    def test_default_learning_rates(self):
        assert CFG.learning_rate_w == 0.01
        assert CFG.learning_rate_mu is None  # sgd resolves this to 0.05

    def test_two_layer_runs_and_is_finite(self):
        train, _, vp, lam, C = make_problem(10)
        st = train_dual_sgd([0, 1, 2], train, vp, lam, C, CFG, model_kind="two_layer")
        assert np.isfinite(st.f_value)
        assert st.backend == "sgd"

    def test_mu_in_box(self):
        train, _, vp, lam, C = make_problem(11, delta=0.0)
        st = train_dual_sgd([0, 1], train, vp, lam, C, CFG)
        assert np.all(st.mu >= 0.0) and np.all(st.mu <= C)


class TestPrimal:
    def test_C_zero_equals_ridge_value(self):
        train, _, vp, lam, _ = make_problem(12)
        subset = [0, 1, 3]
        g = primal_value(subset, train, vp, lam, 0.0, tol=1e-9)
        f = train_dual_exact(subset, train, vp, lam, 0.0, CFG).f_value
        assert g == pytest.approx(f, rel=1e-8)

    @pytest.mark.parametrize("seed", range(6))
    def test_strong_duality_linear(self, seed):
        train, _, vp, lam, C = make_problem(seed, q=1 + seed % 2)
        subset = sorted(np.random.default_rng(seed).choice(6, size=3, replace=False))
        f = train_dual_exact(subset, train, vp, lam, C, CFG).f_value
        g = primal_value(subset, train, vp, lam, C, tol=1e-7)
        assert abs(f - g) <= 1e-4 * max(abs(f), 1e-12)

    def test_weak_duality_two_layer(self):
        train, _, vp, lam, C = make_problem(13)
        subset = [0, 2, 4]
        f = train_dual_sgd(subset, train, vp, lam, C, CFG, model_kind="two_layer").f_value
        g = primal_value(subset, train, vp, lam, C, tol=1e-6, model_kind="two_layer", seed=1)
        assert f <= g + 1e-2 * (1.0 + abs(g))


class TestTrainerConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrainerConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainerConfig(learning_rate_mu=-1.0)
        with pytest.raises(ValueError):
            TrainerConfig(batch_size=0)
