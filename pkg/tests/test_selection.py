import pytest

from conftest import make_ctx
from selcon.bounds import claim1_min
from selcon.errors import InvalidAlpha, InvalidK
from selcon.oracle import empirical_alpha
from selcon.selection import (
    SelconConfig,
    modular_scores,
    run_selcon,
    run_selcon_unconstrained,
)


class TestModularScores:
    def test_tight_at_reference(self):
        ctx = make_ctx(40, n=6)
        s_hat = (0, 2, 4)
        scores = modular_scores(ctx, s_hat, alpha=0.8)
        f_hat = ctx.f_of(s_hat)[0]
        const = f_hat - sum(scores[i] for i in s_hat)
        assert const + sum(scores[i] for i in s_hat) == pytest.approx(f_hat, abs=1e-9)

    def test_in_set_scores_nonnegative(self):
        ctx = make_ctx(41, n=6, q=2)
        scores = modular_scores(ctx, (1, 3), alpha=0.9)
        for i in (1, 3):
            assert scores[i] >= -1e-8

    def test_alpha_one_matches_classic_scores(self):
        ctx = make_ctx(42, n=6)
        s_hat = (0, 1)
        scores = modular_scores(ctx, s_hat, alpha=1.0)
        f_hat = ctx.f_of(s_hat)[0]
        f0 = ctx.f_empty()
        for i in range(6):
            if i in s_hat:
                want = f_hat - ctx.f_of(tuple(j for j in s_hat if j != i))[0]
            else:
                want = ctx.f_of((i,))[0] - f0
            assert scores[i] == pytest.approx(want, abs=1e-12)

    def test_requires_positive_alpha(self):
        ctx = make_ctx(43, n=5)
        with pytest.raises(InvalidAlpha):
            modular_scores(ctx, (0,), alpha=0.0)


class TestRunSelcon:
    def test_k_equals_n(self):
        ctx = make_ctx(44, n=5)
        result = run_selcon(ctx, SelconConfig(k=5, seed=0, alpha_mode="fixed", alpha_value=1.0))
        assert result.selected == (0, 1, 2, 3, 4)

    def test_invalid_k(self):
        ctx = make_ctx(45, n=4)
        with pytest.raises(InvalidK):
            run_selcon(ctx, SelconConfig(k=5, seed=0))

    def test_trace_non_increasing_exact(self):
        for seed in range(8):
            ctx = make_ctx(seed + 46, n=7, q=1 + seed % 2)
            result = run_selcon(
                ctx, SelconConfig(k=2 + seed % 2, seed=seed, alpha_mode="empirical")
            )
            values = [v for _, v, _ in result.trace]
            for a, b in zip(values, values[1:]):
                assert b <= a + 1e-9

    def test_deterministic_across_threads(self):
        a = make_ctx(54, n=8)
        b = make_ctx(54, n=8)
        b.threads = 4
        cfg = SelconConfig(k=3, seed=2, alpha_mode="fixed", alpha_value=1.0)
        ra, rb = run_selcon(a, cfg), run_selcon(b, cfg)
        assert ra.selected == rb.selected
        assert ra.f_value == rb.f_value
        assert [t[:2] for t in ra.trace] == [t[:2] for t in rb.trace]

    def test_early_stop_at_fixed_point(self):
        ctx = make_ctx(55, n=6)
        cfg = SelconConfig(k=2, seed=0, L=50, alpha_mode="fixed", alpha_value=1.0)
        result = run_selcon(ctx, cfg)
        assert len(result.trace) < 50

    def test_alpha_floor_when_certificate_vacuous(self):
        # Small lam: the certified ratio is negative, so the floor applies.
        ctx = make_ctx(56, n=6, lam=0.5, C=1.0)
        cfg = SelconConfig(k=2, seed=0, alpha_mode="certified", alpha_floor=0.05)
        result = run_selcon(ctx, cfg)
        assert result.alpha_used == pytest.approx(0.05)

    def test_certified_alpha_used_when_valid(self):
        from selcon.bounds import alpha_hat_linear, data_constants, lambda_min_linear

        base = make_ctx(57, n=6, y_lo=0.5, y_hi=1.5)
        consts = data_constants(base.train, base.valpart.data, q=1)
        lam = 2.0 * lambda_min_linear(base.C, 1, consts)
        ctx = base.__class__(
            train=base.train, valpart=base.valpart, lam=lam, C=base.C, trainer=base.trainer
        )
        result = run_selcon(ctx, SelconConfig(k=2, seed=0, alpha_mode="certified"))
        assert result.alpha_used == pytest.approx(
            alpha_hat_linear(lam, ctx.C, 1, consts)
        )


class TestUnconstrained:
    def test_identical_when_C_already_zero(self):
        a = make_ctx(58, n=6, C=0.0)
        b = make_ctx(58, n=6, C=0.0)
        cfg = SelconConfig(k=2, seed=1, alpha_mode="fixed", alpha_value=1.0)
        ra = run_selcon(a, cfg)
        rb = run_selcon_unconstrained(b, cfg)
        assert ra.selected == rb.selected
        assert ra.f_value == pytest.approx(rb.f_value)

    def test_first_iteration_scores_are_scaled_claim_forms(self):
        ctx = make_ctx(59, n=6, C=0.0)
        alpha = 0.5
        scores = modular_scores(ctx, (0, 1), alpha=alpha)
        for i in range(2, 6):
            want = claim1_min(ctx.lam, ctx.train.targets[i], ctx.train.features[i]) / alpha
            assert scores[i] == pytest.approx(want, abs=1e-10)

    def test_seeded_determinism(self):
        cfg = SelconConfig(k=3, seed=7, alpha_mode="fixed", alpha_value=1.0)
        r1 = run_selcon_unconstrained(make_ctx(60, n=7), cfg)
        r2 = run_selcon_unconstrained(make_ctx(60, n=7), cfg)
        assert r1.selected == r2.selected
        assert r1.method == "selcon-unconstrained"


class TestWarmLeaveOneOut:
    def test_sgd_speed_mode_runs(self):
        from selcon.dual import TrainerConfig

        trainer = TrainerConfig(epochs=40, seed=0)
        ctx = make_ctx(62, n=6, backend="sgd", trainer=trainer)
        cfg = SelconConfig(
            k=2, L=2, seed=0, alpha_mode="fixed", alpha_value=1.0, warm_loo_epochs=3
        )
        result = run_selcon(ctx, cfg)
        assert len(result.selected) == 2
        assert result.state.backend == "sgd"

    def test_refine_rejected_on_exact_backend(self):
        ctx = make_ctx(63, n=4)
        _, state = ctx.f_of((0, 1))
        with pytest.raises(ValueError):
            ctx.refine((0,), epochs=3, init_state=state)


class TestBoundDominance:
    def test_assembled_bound_dominates_f(self):
        # With the instance's exhaustively measured ratio, the modular bound
        # built at the driver's final set dominates f everywhere.
        ctx = make_ctx(61, n=6, q=2)
        result = run_selcon(ctx, SelconConfig(k=2, seed=3, alpha_mode="empirical"))
        alpha = empirical_alpha(ctx)
        scores = modular_scores(ctx, result.selected, alpha)
        f_hat = ctx.f_of(result.selected)[0]
        const = f_hat - sum(scores[i] for i in result.selected)
        for mask in range(64):
            members = [i for i in range(6) if mask >> i & 1]
            bound = const + sum(scores[i] for i in members)
            assert bound >= ctx.f_of(tuple(members))[0] - 1e-8
