import math

import numpy as np
import pytest

from gridbias import (
    BootstrapFailureError,
    DegenerateDesignError,
    Grid,
    TrajectoryPanel,
    TransitionFit,
    TreatmentPlan,
    bootstrap_ci,
    estimate_contrast,
    fit_transition,
    gformula_plugin,
    matexp,
    sensitivity_ratio,
    simulate_panel,
    subsample_panel,
    theta_g,
    theta_naive,
    zeta,
)
from tests.conftest import make_params


def synthetic_panel(a, b, c, n=6, J=5, seed=0, noise=0.0):
    """Panel generated exactly by Y_k = a + b Y_{k-1} + c W_{k-1}."""
    rng = np.random.default_rng(seed)
    values = np.empty((n, J + 1, 2))
    values[:, :, 1] = rng.uniform(-1, 1, size=(n, J + 1))
    values[:, 0, 0] = rng.uniform(-1, 1, size=n)
    for k in range(J):
        values[:, k + 1, 0] = (
            a
            + b * values[:, k, 0]
            + c * values[:, k, 1]
            + noise * rng.standard_normal(n)
        )
    return TrajectoryPanel(grid=Grid(J=J, T=1.0), n=n, values=values, seed=seed)


class TestFitTransition:
    def test_exact_recovery_from_noiseless_panel(self):
        panel = synthetic_panel(0.5, 0.9, 0.1)
        fit = fit_transition(panel)
        assert fit.intercept == pytest.approx(0.5, abs=1e-9)
        assert fit.lag_outcome == pytest.approx(0.9, abs=1e-9)
        assert fit.lag_treatment == pytest.approx(0.1, abs=1e-9)
        assert fit.n_transitions == 6 * 5
        assert fit.residual_variance == pytest.approx(0.0, abs=1e-18)

    def test_too_few_transitions(self):
        panel = synthetic_panel(0.0, 0.5, 0.5, n=1, J=2)
        with pytest.raises(DegenerateDesignError):
            fit_transition(panel)

    def test_constant_treatment_is_degenerate(self):
        panel = synthetic_panel(0.0, 0.5, 0.5, n=5, J=5)
        values = panel.values.copy()
        values[:, :, 1] = 1.0
        broken = TrajectoryPanel(grid=panel.grid, n=panel.n, values=values, seed=0)
        with pytest.raises(DegenerateDesignError):
            fit_transition(broken)

    def test_large_sample_recovers_transition_map(self, ref_params):
        J, n = 10, 20_000
        panel = simulate_panel(ref_params, Grid(J=J, T=1.0), n, seed=21)
        fit = fit_transition(panel)
        g = matexp(ref_params.beta, -1.0 / J)
        # OLS standard errors from the pooled design
        y_lag = panel.values[:, :-1, 0].ravel()
        w_lag = panel.values[:, :-1, 1].ravel()
        x = np.column_stack((np.ones_like(y_lag), y_lag, w_lag))
        se = np.sqrt(fit.residual_variance * np.diag(np.linalg.inv(x.T @ x)))
        assert abs(fit.intercept - 0.0) < 4 * se[0]
        assert abs(fit.lag_outcome - g[0, 0]) < 4 * se[1]
        assert abs(fit.lag_treatment - g[0, 1]) < 4 * se[2]

    def test_rejects_nonfinite_coefficients(self):
        with pytest.raises(ValueError):
            TransitionFit(
                intercept=math.nan,
                lag_outcome=0.0,
                lag_treatment=0.0,
                residual_variance=1.0,
                n_transitions=10,
            )


class TestGformulaPlugin:
    def test_fixed_point(self):
        fit = TransitionFit(0.0, 0.9, 0.1, 0.0, 10)
        plan = TreatmentPlan.constant(1.0, horizon=1.0)
        assert gformula_plugin(fit, 1.0, plan, Grid(J=2, T=1.0)) == 1.0

    def test_geometric_decay_under_null_plan(self):
        fit = TransitionFit(0.0, 0.8, 0.3, 0.0, 10)
        plan = TreatmentPlan.constant(0.0, horizon=1.0)
        got = gformula_plugin(fit, 2.0, plan, Grid(J=7, T=1.0))
        assert got == pytest.approx(0.8**7 * 2.0, rel=1e-14)

    def test_true_coefficients_reproduce_grid_functional(self, ref_params, plan_one):
        J = 9
        g = matexp(ref_params.beta, -1.0 / J)
        fit = TransitionFit(0.0, float(g[0, 0]), float(g[0, 1]), 0.0, 100)
        got = gformula_plugin(fit, float(ref_params.init_mean[0]), plan_one, Grid(J=J, T=1.0))
        assert got == pytest.approx(theta_g(ref_params, plan_one, J), abs=1e-12)


class TestEstimateContrast:
    def test_identical_plans_give_zero(self, ref_params, plan_one):
        panel = simulate_panel(ref_params, Grid(J=6, T=1.0), 50, seed=11)
        assert estimate_contrast(panel, plan_one, plan_one).tau_hat == 0.0

    def test_null_effect_contrast_near_zero(self, plan_one, plan_zero):
        p = make_params(beta12=0.0)
        n = 5_000
        panel = simulate_panel(p, Grid(J=10, T=1.0), n, seed=13)
        tau = estimate_contrast(panel, plan_one, plan_zero).tau_hat
        lo, hi = bootstrap_ci(panel, plan_one, plan_zero, 200, 0.05, seed=13)
        se = (hi - lo) / (2 * 1.96)
        assert abs(tau) < 4 * se

    def test_reference_study_settings(self, ref_params, plan_one, plan_zero):
        panel = simulate_panel(ref_params, Grid(J=40, T=1.0), 200, seed=14)
        est = estimate_contrast(panel, plan_one, plan_zero)
        target = theta_g(ref_params, plan_one, 40) - theta_g(ref_params, plan_zero, 40)
        lo, hi = bootstrap_ci(panel, plan_one, plan_zero, 500, 0.05, seed=14)
        se = (hi - lo) / (2 * 1.96)
        assert abs(est.tau_hat - target) < 4 * se

    @pytest.mark.slow
    def test_error_shrinks_with_sample_size(self, ref_params, plan_one, plan_zero):
        # Mean absolute estimation error over 20 seeds must shrink along
        # the sample-size ladder.
        target = theta_g(ref_params, plan_one, 10) - theta_g(ref_params, plan_zero, 10)
        mean_abs_err = []
        for n in (100, 1_000, 10_000):
            errs = [
                abs(
                    estimate_contrast(
                        simulate_panel(ref_params, Grid(J=10, T=1.0), n, seed=2_000 + s),
                        plan_one,
                        plan_zero,
                    ).tau_hat
                    - target
                )
                for s in range(20)
            ]
            mean_abs_err.append(float(np.mean(errs)))
        assert mean_abs_err[0] > mean_abs_err[1] > mean_abs_err[2]


class TestBootstrapCi:
    def test_deterministic_given_seed(self, ref_params, plan_one, plan_zero):
        panel = simulate_panel(ref_params, Grid(J=8, T=1.0), 100, seed=17)
        a = bootstrap_ci(panel, plan_one, plan_zero, 100, 0.05, seed=5)
        b = bootstrap_ci(panel, plan_one, plan_zero, 100, 0.05, seed=5)
        assert a == b
        c = bootstrap_ci(panel, plan_one, plan_zero, 100, 0.05, seed=6)
        assert a != c

    def test_degenerate_panel_zero_width_at_estimate(self, ref_params, plan_one, plan_zero):
        one = simulate_panel(ref_params, Grid(J=8, T=1.0), 1, seed=19)
        values = np.tile(one.values, (30, 1, 1))
        clones = TrajectoryPanel(grid=one.grid, n=30, values=values, seed=19)
        tau = estimate_contrast(clones, plan_one, plan_zero).tau_hat
        lo, hi = bootstrap_ci(clones, plan_one, plan_zero, 50, 0.05, seed=1)
        assert lo == hi == tau

    def test_interval_brackets_estimate(self, ref_params, plan_one, plan_zero):
        for seed in range(10):
            panel = simulate_panel(ref_params, Grid(J=10, T=1.0), 150, seed=seed)
            tau = estimate_contrast(panel, plan_one, plan_zero).tau_hat
            lo, hi = bootstrap_ci(panel, plan_one, plan_zero, 300, 0.05, seed=seed)
            assert lo <= tau <= hi

    def test_all_replicates_degenerate_raises(self, plan_one, plan_zero):
        rng = np.random.default_rng(3)
        values = np.empty((10, 6, 2))
        values[:, :, 0] = rng.standard_normal((10, 6))
        values[:, :, 1] = 1.0
        panel = TrajectoryPanel(grid=Grid(J=5, T=1.0), n=10, values=values, seed=3)
        with pytest.raises(BootstrapFailureError):
            bootstrap_ci(panel, plan_one, plan_zero, 20, 0.05, seed=3)

    def test_parameter_validation(self, ref_params, plan_one, plan_zero):
        panel = simulate_panel(ref_params, Grid(J=4, T=1.0), 10, seed=1)
        with pytest.raises(ValueError):
            bootstrap_ci(panel, plan_one, plan_zero, 1, 0.05, seed=1)
        with pytest.raises(ValueError):
            bootstrap_ci(panel, plan_one, plan_zero, 10, 1.5, seed=1)


class TestSensitivityRatio:
    def test_interval_covering_zero(self):
        assert sensitivity_ratio(0.05, 0.3, -0.1, 0.2) == 0.0

    def test_direct_formula(self):
        assert sensitivity_ratio(2.0, 1.5, 1.0, 3.0) == pytest.approx(2.0)

    def test_undefined_denominator(self):
        assert sensitivity_ratio(2.0, 2.0, 1.0, 3.0) is None

    def test_endpoints_inclusive(self):
        assert sensitivity_ratio(1.0, 0.5, 0.0, 2.0) == 0.0
        assert sensitivity_ratio(-1.0, -0.5, -2.0, 0.0) == 0.0


class TestZeta:
    def test_odd_grid_rejected(self, ref_params, plan_one, plan_zero):
        panel = simulate_panel(ref_params, Grid(J=9, T=1.0), 50, seed=23)
        with pytest.raises(ValueError, match="even"):
            zeta(panel, plan_one, plan_zero, 50, 0.05, seed=23)

    def test_report_is_self_consistent(self, plan_one, plan_zero):
        p = make_params(beta12=-10.0)
        panel = simulate_panel(p, Grid(J=20, T=1.0), 200, seed=29)
        rep = zeta(panel, plan_one, plan_zero, 200, 0.05, seed=29)
        assert rep.ci_lower <= rep.ci_upper
        assert rep.tau_hat == estimate_contrast(panel, plan_one, plan_zero).tau_hat
        if rep.ci_lower <= 0.0 <= rep.ci_upper:
            assert rep.zeta == 0.0
        else:
            want = min(abs(rep.ci_lower), abs(rep.ci_upper)) / abs(
                rep.tau_hat - rep.tau_hat_half
            )
            assert rep.zeta == want
            assert rep.zeta > 0.0

    def test_half_grid_estimate_matches_manual_subsample(self, ref_params, plan_one, plan_zero):
        panel = simulate_panel(ref_params, Grid(J=16, T=1.0), 120, seed=31)
        rep = zeta(panel, plan_one, plan_zero, 50, 0.05, seed=31)
        resim = simulate_panel(ref_params, Grid(J=16, T=1.0), 120, seed=31)
        manual = estimate_contrast(subsample_panel(resim, 2), plan_one, plan_zero)
        assert rep.tau_hat_half == manual.tau_hat
        assert manual.J == 8

    def test_null_effect_mostly_zero(self, plan_one, plan_zero):
        p = make_params(beta12=0.0)
        zeros = 0
        for seed in range(6):
            panel = simulate_panel(p, Grid(J=8, T=1.0), 200, seed=seed)
            rep = zeta(panel, plan_one, plan_zero, 200, 0.05, seed=seed)
            zeros += rep.zeta == 0.0
        assert zeros >= 5

    def test_bit_identical_given_seed(self, plan_one, plan_zero):
        p = make_params(beta12=-10.0)
        panel = simulate_panel(p, Grid(J=12, T=1.0), 100, seed=37)
        a = zeta(panel, plan_one, plan_zero, 100, 0.05, seed=37)
        b = zeta(panel, plan_one, plan_zero, 100, 0.05, seed=37)
        assert a == b


class TestNaiveEstimandMonteCarlo:
    def test_formula_matches_regression_plug_in(self, ref_params, plan_one):
        # The outcome-history-only estimand: regress Y_J on the last state,
        # plug in the schedule value, average over the factual lag outcome.
        J = 10
        want, _ = theta_naive(ref_params, plan_one, J)
        estimates = []
        for seed in range(10):
            panel = simulate_panel(ref_params, Grid(J=J, T=1.0), 50_000, seed=100 + seed)
            fit = fit_transition(panel)
            y_prev = panel.values[:, -2, 0]
            w_star = plan_one((J - 1) / J)
            estimates.append(
                fit.intercept + fit.lag_outcome * y_prev.mean() + fit.lag_treatment * w_star
            )
        se = np.std(estimates, ddof=1) / math.sqrt(len(estimates))
        assert abs(np.mean(estimates) - want) < 4 * se
