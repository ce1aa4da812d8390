import math

import numpy as np
import pytest

import archcredit.estimators as est_mod
from archcredit import (
    DefaultScale,
    EstimationError,
    EstimatorConfig,
    NumericalError,
    Portfolio,
    RngStream,
    RunContext,
    SubPortfolio,
    aggregate,
    condmc_one_rep,
    is_expected_shortfall,
    is_sample_v,
    is_tail_one_rep,
    naive_tail_one_rep,
    run_tail_estimate,
    solve_theta_star,
)

RARE = dict(
    portfolio=Portfolio.homogeneous(500, exposure=1.0, pd_scale=0.5),
    alpha=1.5,
    scale=DefaultScale.reciprocal(),
    b=0.8,
)

DESK = dict(
    portfolio=Portfolio.homogeneous(20, exposure=1.0, pd_scale=0.5),
    alpha=1.5,
    scale=DefaultScale.constant(0.3),
    b=0.4,
)


def config(base=RARE, **kw):
    args = dict(base, m=1000, seed=1, kind="conditional")
    args.update(kw)
    return EstimatorConfig(**args)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            config(m=1)
        with pytest.raises(ValueError):
            config(x0=0.0)
        with pytest.raises(ValueError):
            config(kind="antithetic")
        with pytest.raises(ValueError):
            config(b=1.0)
        with pytest.raises(ValueError):
            config(alpha=1.0)
        with pytest.raises(ValueError):
            config(threads=0)


class TestTwist:
    def test_no_twist_when_mean_loss_reaches_target(self):
        pf = Portfolio.homogeneous(500)
        tw = solve_theta_star(pf, [0.9], 0.8)
        assert tw.theta == 0.0
        assert tw.twisted == (0.9,)
        assert tw.cumulant == 0.0

    def test_homogeneous_closed_form(self):
        # 500 obligors at p=0.1 twisted to mean 400: odds ratio 36
        pf = Portfolio.homogeneous(500)
        tw = solve_theta_star(pf, [0.1], 0.8)
        assert tw.theta == pytest.approx(math.log(36.0), rel=1e-12)
        assert tw.twisted[0] == pytest.approx(0.8, rel=1e-12)

    def test_multi_group_calibration(self):
        pf = Portfolio(
            [SubPortfolio(1.0, 0.5, 300), SubPortfolio(2.5, 0.8, 200)]
        )
        probs = (0.05, 0.02)
        b = 1.1
        tw = solve_theta_star(pf, probs, b)
        assert tw.theta > 0.0
        mean = sum(
            n * c * pt
            for n, c, pt in zip(
                [g.count for g in pf.groups], [g.exposure for g in pf.groups], tw.twisted
            )
        )
        assert abs(mean - pf.n * b) <= 1e-9 * pf.n * b
        assert tw.cumulant > 0.0

    def test_twisted_probabilities_form(self):
        pf = Portfolio([SubPortfolio(1.0, 0.5, 50), SubPortfolio(3.0, 0.5, 50)])
        probs = (0.1, 0.2)
        tw = solve_theta_star(pf, probs, 1.2)
        for p, pt, c in zip(probs, tw.twisted, (1.0, 3.0)):
            want = p * math.exp(tw.theta * c) / (1.0 + p * (math.exp(tw.theta * c) - 1.0))
            assert pt == pytest.approx(want, rel=1e-12)

    def test_unattainable_target(self):
        pf = Portfolio.homogeneous(10)
        with pytest.raises(ValueError, match="attainable"):
            solve_theta_star(pf, [0.5], 1.5)  # n*b beyond total exposure

    def test_probability_domain(self):
        pf = Portfolio.homogeneous(10)
        with pytest.raises(ValueError):
            solve_theta_star(pf, [0.0], 0.5)
        with pytest.raises(ValueError):
            solve_theta_star(pf, [1.0], 0.5)


class TestSpliceSampler:
    def test_shape_parameter(self):
        ctx = RunContext(config(kind="importance", x0=1.0))
        assert ctx.eta == pytest.approx(0.10729140712187804, rel=1e-12)

    def test_unit_factor_below_splice(self):
        ctx = RunContext(config(kind="importance", x0=1.0))
        rng = RngStream(8)
        seen_body = 0
        for _ in range(300):
            v, lr = is_sample_v(ctx, rng)
            assert v > 0.0
            if v < ctx.config.x0:
                assert lr == 1.0
                seen_body += 1
            else:
                assert lr >= 0.0
        assert seen_body > 0

    def test_mean_likelihood_factor_is_one(self):
        # change-of-measure identity for the spliced proposal
        ctx = RunContext(config(kind="importance", x0=1.0))
        rng = RngStream(44)
        n = 100_000
        lrs = np.array([is_sample_v(ctx, rng)[1] for _ in range(n)])
        z = (lrs.mean() - 1.0) / (lrs.std(ddof=1) / math.sqrt(n))
        assert abs(z) <= 4.0

    def test_rejection_cap_error(self, monkeypatch):
        # force the body branch while making acceptance below x0 hopeless
        ctx = RunContext(config(kind="importance", x0=1e-3))
        ctx.cdf_x0 = 1.0
        monkeypatch.setattr(est_mod, "_REJECTION_CAP", 50)
        with pytest.raises(NumericalError, match="splice"):
            is_sample_v(ctx, RngStream(3))

    def test_scale_too_large_for_splice(self):
        # phi(1 - f_n) >= 1 leaves the Pareto shape undefined
        pf = Portfolio.homogeneous(20, pd_scale=0.2)
        with pytest.raises(ValueError, match="phi"):
            RunContext(
                EstimatorConfig(
                    portfolio=pf,
                    alpha=1.5,
                    scale=DefaultScale.constant(0.95),
                    b=0.1,
                    m=10,
                    seed=0,
                    kind="importance",
                )
            )


class TestImportanceRep:
    def test_plain_indicator_when_untwisted_below_splice(self, monkeypatch):
        # with the mixture pinned below x0 and a mean loss above target the
        # replication must return the bare indicator
        cfg = config(base=DESK, kind="importance", m=10, seed=2, b=0.05)
        ctx = RunContext(cfg)
        v_fix = 4.0  # mean loss 20 * p(4.0) > 1 = n*b, so no twist
        probs = ctx.conditional_probs(v_fix)
        assert sum(n * c * p for n, c, p in zip(ctx.counts, ctx.exposures, probs)) > ctx.nb
        monkeypatch.setattr(est_mod, "is_sample_v", lambda c, r: (v_fix, 1.0))
        rng = RngStream(6)
        vals = {is_tail_one_rep(ctx, rng) for _ in range(50)}
        assert vals <= {0.0, 1.0}

    def test_values_nonnegative(self):
        cfg = config(kind="importance", m=500, seed=5)
        ctx = RunContext(cfg)
        root = RngStream(cfg.seed)
        vals = [is_tail_one_rep(ctx, root.substream(i)) for i in range(500)]
        assert all(v >= 0.0 for v in vals)

    def test_matches_naive_in_non_rare_regime(self):
        m = 40_000
        naive = run_tail_estimate(config(base=DESK, kind="naive", m=m, seed=11))
        imp = run_tail_estimate(config(base=DESK, kind="importance", m=m, seed=12))
        gap = abs(naive.estimate - imp.estimate)
        assert gap <= 4.0 * math.hypot(naive.std_error, imp.std_error)


class TestConditionalRep:
    def test_single_obligor_unwinds_definition(self):
        pf = Portfolio.homogeneous(1, exposure=1.0, pd_scale=0.5)
        cfg = EstimatorConfig(
            portfolio=pf,
            alpha=1.5,
            scale=DefaultScale.constant(0.3),
            b=0.5,
            m=10,
            seed=21,
            kind="conditional",
        )
        ctx = RunContext(cfg)
        stream = RngStream(99)
        got = condmc_one_rep(ctx, stream)
        r = RngStream(99).standard_exponential(1)[0]
        want = ctx.law.sf(r / ctx.gen.phi_one_minus(0.5 * 0.3))
        assert got == pytest.approx(want, rel=1e-12)

    def test_values_in_unit_interval_and_rao_blackwell(self):
        cfg = config(base=DESK, kind="conditional", m=4000, seed=31)
        ctx = RunContext(cfg)
        root = RngStream(cfg.seed)
        vals = np.array([condmc_one_rep(ctx, root.substream(i)) for i in range(cfg.m)])
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
        p_hat = vals.mean()
        assert vals.var(ddof=1) <= p_hat * (1.0 - p_hat)

    def test_heterogeneous_exposures_match_naive(self):
        # two exposure classes force the per-replication threshold search
        pf = Portfolio([SubPortfolio(1.0, 0.5, 12), SubPortfolio(3.0, 0.7, 8)])
        base = dict(portfolio=pf, alpha=1.5, scale=DefaultScale.constant(0.3), b=0.6)
        m = 40_000
        naive = run_tail_estimate(config(base=base, kind="naive", m=m, seed=41))
        cond = run_tail_estimate(config(base=base, kind="conditional", m=m, seed=42))
        gap = abs(naive.estimate - cond.estimate)
        assert gap <= 4.0 * math.hypot(naive.std_error, cond.std_error)

    def test_fast_scale_decay_warns(self):
        pf = Portfolio.homogeneous(100, pd_scale=0.5)
        cfg = EstimatorConfig(
            portfolio=pf,
            alpha=1.5,
            scale=DefaultScale.constant(5e-4),  # below 1/(10 n)
            b=0.5,
            m=10,
            seed=0,
            kind="conditional",
        )
        with pytest.warns(UserWarning, match="conditional"):
            RunContext(cfg)


class TestAggregate:
    def test_equal_positive_values(self):
        rep = aggregate(np.full(100, 0.25), seed=7)
        assert rep.estimate == 0.25
        assert rep.rel_error_pct == 0.0
        assert math.isinf(rep.variance_reduction)
        assert "capped" in rep.notes

    def test_all_zero_values_flagged(self):
        rep = aggregate(np.zeros(50))
        assert rep.estimate == 0.0
        assert math.isnan(rep.rel_error_pct)
        assert "undefined" in rep.notes

    def test_bernoulli_values_have_unit_variance_reduction(self):
        rng = RngStream(3)
        vals = (rng.uniform(size=20_000) < 0.3).astype(float)
        rep = aggregate(vals)
        assert rep.variance_reduction == pytest.approx(1.0, abs=1e-3)

    def test_matches_numpy_moments(self):
        vals = RngStream(9).uniform(size=500)
        rep = aggregate(vals, seed=5, runtime_s=1.5)
        assert rep.estimate == vals.mean()
        assert rep.std_error == pytest.approx(vals.std(ddof=1) / math.sqrt(500), rel=1e-12)
        assert rep.m == 500 and rep.seed == 5 and rep.runtime_s == 1.5

    def test_needs_two_values(self):
        with pytest.raises(ValueError):
            aggregate(np.array([1.0]))

    def test_unknown_baseline(self):
        with pytest.raises(ValueError):
            aggregate(np.ones(5), "poisson")


class TestRunners:
    def test_bitwise_determinism(self):
        cfg = config(kind="conditional", m=400, seed=17)
        a = run_tail_estimate(cfg)
        b = run_tail_estimate(cfg)
        assert a.estimate == b.estimate
        assert a.std_error == b.std_error
        assert a.variance_reduction == b.variance_reduction

    def test_thread_count_does_not_change_values(self):
        one = run_tail_estimate(config(kind="importance", m=600, seed=23, threads=1))
        four = run_tail_estimate(config(kind="importance", m=600, seed=23, threads=4))
        assert one.estimate == four.estimate
        assert one.std_error == four.std_error

    def test_naive_rare_event_often_all_zero(self):
        rep = run_tail_estimate(config(kind="naive", m=200, seed=2))
        assert rep.estimate <= 0.05


class TestExpectedShortfall:
    def test_zero_exceedances_error(self):
        cfg = config(kind="importance", m=2, seed=13)
        with pytest.raises(EstimationError, match="increase m"):
            is_expected_shortfall(cfg)

    def test_kind_coerced_to_importance(self):
        rep = is_expected_shortfall(config(kind="conditional", m=4000, seed=3))
        assert rep.estimate > 400.0
        assert math.isnan(rep.variance_reduction)

    def test_estimate_tracks_asymptotic(self):
        rep = is_expected_shortfall(config(kind="importance", m=8000, seed=19))
        # coarse run stays within a percent of the deterministic approximation
        assert rep.estimate == pytest.approx(476.95, rel=0.01)
        assert rep.std_error < 5.0

    def test_likelihood_normalization(self):
        # mean of the unbiasing weight without the indicator is 1; sampled on
        # the non-rare desk instance where the weight tail is light enough
        # for the sample mean to see the full mass
        cfg = config(base=DESK, kind="importance", m=60_000, seed=29)
        ctx = RunContext(cfg)
        root = RngStream(cfg.seed)
        w = np.array(
            [est_mod._is_loss_and_weight(ctx, root.substream(i))[1] for i in range(cfg.m)]
        )
        z = (w.mean() - 1.0) / (w.std(ddof=1) / math.sqrt(cfg.m))
        assert abs(z) <= 4.0
