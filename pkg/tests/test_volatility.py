import math
from unittest import TestCase

import numpy as np

from spread_market.volatility import (
    TABLE_COLUMNS,
    VARIANCE_COLUMNS,
    EgarchSpec,
    InsufficientData,
    NonFinite,
    VolatilityError,
    compare_models,
    covariate_log_returns,
    egarch_loglik,
    fit_egarch,
    fits_to_dict,
    significance_stars,
    simulate_egarch,
    start_points,
    variance_table,
)

TRUE_PARAMS = (0.0003, -0.35, -0.08, 0.15, 0.96)
SPEC_PARAMS = (0.0, -0.2, -0.1, 0.15, 0.95)


class TestLoglik(TestCase):
    def test_unit_variance(self):
        loglik, sigma2 = egarch_loglik((0.0, 0.0, 0.0, 0.0, 0.0), np.array([1.0, -1.0]))
        self.assertAlmostEqual(-(math.log(2 * math.pi) + 1.0), loglik, places=12)
        self.assertListEqual([1.0, 1.0], sigma2.tolist())

    def test_covariate_shifts_log_variance(self):
        returns = np.array([0.5, -0.2, 0.1])
        _, sigma2 = egarch_loglik((0.0, 0.0, 0.0, 0.0, 0.0, 1.0), returns, np.array([0.0, 1.0, 2.0]))
        np.testing.assert_allclose([1.0, math.e, math.e**2], sigma2)

    def test_errors(self):
        with self.assertRaises(VolatilityError):
            egarch_loglik((0.0, 0.0, 0.0, 0.0), np.ones(5))
        with self.assertRaises(InsufficientData):
            egarch_loglik(TRUE_PARAMS, np.array([0.01]))
        with self.assertRaises(NonFinite):
            egarch_loglik((0.0, 800.0, 0.0, 0.0, 0.0), np.array([0.01, 0.02]))

    def test_start_points(self):
        returns = np.array([0.01, -0.02, 0.03, 0.0])
        base, level = start_points(returns, 2)
        self.assertEqual(7, len(base))
        self.assertAlmostEqual(math.log(np.var(returns, ddof=1)), base[1])
        self.assertAlmostEqual(0.1 * base[1], level[1])
        self.assertListEqual([0.0, 0.0], base[5:].tolist())

    def test_five_step_recursion(self):
        params = (0.1, -0.2, -0.1, 0.15, 0.95)
        returns = [0.2, -0.1, 0.05, 0.3, -0.25]
        mu, omega0, omega, gamma, tau = params
        h = math.log(np.var(returns, ddof=1))
        eta, expected_ll, expected_sigma2 = 0.0, 0.0, []
        for r in returns:
            h = omega0 + omega * eta + gamma * abs(eta) + tau * h
            expected_sigma2.append(math.exp(h))
            eta = (r - mu) / math.exp(h / 2)
            expected_ll += -0.5 * (math.log(2 * math.pi) + h + eta**2)
        loglik, sigma2 = egarch_loglik(params, np.array(returns))
        self.assertAlmostEqual(expected_ll, loglik, places=12)
        np.testing.assert_allclose(expected_sigma2, sigma2, rtol=1e-12)

        # first step: eta_0 = 0, so only omega0 and the persistence term move the log-variance
        first = omega0 + tau * math.log(np.var(returns, ddof=1))
        self.assertAlmostEqual(math.exp(first), sigma2[0], places=14)

    def test_zero_lambda_matches_model_0(self):
        returns, _ = simulate_egarch(SPEC_PARAMS, 300, np.random.default_rng(3))
        x = np.random.default_rng(4).standard_normal((300, 2))
        base, sigma2 = egarch_loglik(SPEC_PARAMS, returns)
        nested, nested_sigma2 = egarch_loglik(SPEC_PARAMS + (0.0, 0.0), returns, x)
        self.assertEqual(base, nested)
        np.testing.assert_array_equal(sigma2, nested_sigma2)

    def test_scale_equivariance(self):
        returns, _ = simulate_egarch(SPEC_PARAMS, 300, np.random.default_rng(5))
        mu, omega0, omega, gamma, tau = SPEC_PARAMS
        for c in (0.01, 10.0):
            moved = (c * mu, omega0 + 2 * math.log(c) * (1 - tau), omega, gamma, tau)
            loglik, sigma2 = egarch_loglik(SPEC_PARAMS, returns)
            scaled, scaled_sigma2 = egarch_loglik(moved, c * returns)
            self.assertAlmostEqual(loglik - len(returns) * math.log(c), scaled, places=6)
            np.testing.assert_allclose(c**2 * sigma2, scaled_sigma2, rtol=1e-9)


class TestFit(TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.returns, cls.sigma2 = simulate_egarch(TRUE_PARAMS, 2000, np.random.default_rng(42))
        cls.fit = fit_egarch(EgarchSpec(), cls.returns)

    def test_standard_errors(self):
        self.assertTrue(self.fit.hessian_ok)
        self.assertTrue(np.all(self.fit.std_errors > 0))

    def test_recovers_parameters(self):
        seeds = range(10)
        hits = np.zeros(5, dtype=int)
        for seed in seeds:
            returns, _ = simulate_egarch(TRUE_PARAMS, 2000, np.random.default_rng(100 + seed))
            fit = fit_egarch(EgarchSpec(), returns)
            tolerance = np.maximum(0.1, 3 * np.nan_to_num(fit.std_errors, nan=0.0))
            hits += np.abs(fit.params - np.asarray(TRUE_PARAMS)) <= tolerance
        self.assertTrue(np.all(hits >= 9), hits)

    def test_recovers_parameter_set_over_seeds(self):
        hits = np.zeros(5, dtype=int)
        for seed in range(50):
            returns, _ = simulate_egarch(SPEC_PARAMS, 1000, np.random.default_rng(500 + seed))
            fit = fit_egarch(EgarchSpec(), returns)
            hits += np.abs(fit.params - np.asarray(SPEC_PARAMS)) <= 3 * np.nan_to_num(fit.std_errors, nan=0.0)
        self.assertTrue(np.all(hits >= 45), hits)

    def test_noise_covariate_is_not_significant(self):
        noise = np.random.default_rng(9).standard_normal(len(self.returns))
        initial = np.concatenate([self.fit.params, [0.0]])
        fit = fit_egarch(EgarchSpec(("noise",)), self.returns, noise, initial=initial)
        self.assertTrue(fit.hessian_ok)
        self.assertLessEqual(abs(fit.params[5]), 3 * fit.std_errors[5])

    def test_scaled_returns_fit(self):
        returns = self.returns[:800]
        fit = fit_egarch(EgarchSpec(), returns)
        scaled = fit_egarch(EgarchSpec(), 10.0 * returns)
        self.assertAlmostEqual(fit.loglik - len(returns) * math.log(10.0), scaled.loglik, delta=0.05)
        self.assertAlmostEqual(fit.params[4], scaled.params[4], delta=0.01)

    def test_criteria(self):
        fit = self.fit
        self.assertEqual("Model 0", fit.spec.name)
        self.assertEqual(2000, fit.n)
        self.assertAlmostEqual((-2 * fit.loglik + 2 * 5) / 2000, fit.aic_norm)
        self.assertAlmostEqual((-2 * fit.loglik + 5 * math.log(2000)) / 2000, fit.bic_norm)
        self.assertEqual(2000, len(fit.sigma2))

    def test_maximum(self):
        best = egarch_loglik(self.fit.params, self.returns)[0]
        for i in range(5):
            moved = self.fit.params.copy()
            moved[i] += 0.01
            self.assertLessEqual(egarch_loglik(moved, self.returns)[0], best + 1e-6)

    def test_insufficient_data(self):
        with self.assertRaises(InsufficientData):
            fit_egarch(EgarchSpec(), self.returns[:29])

    def test_non_finite_returns(self):
        returns = self.returns[:100].copy()
        returns[3] = np.nan
        with self.assertRaises(NonFinite):
            fit_egarch(EgarchSpec(), returns)

    def test_covariate_columns_must_match(self):
        with self.assertRaises(VolatilityError):
            fit_egarch(EgarchSpec(("a", "b")), self.returns[:100], np.zeros((100, 1)))


class TestModelX(TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        rng = np.random.default_rng(7)
        n = 1500
        cls.x = rng.standard_normal(n)
        params = TRUE_PARAMS + (0.3,)
        cls.returns, _ = simulate_egarch(params, n, rng, covariates=cls.x)
        cls.fit0 = fit_egarch(EgarchSpec(), cls.returns)
        cls.fitX = fit_egarch(EgarchSpec(("x",)), cls.returns, cls.x)

    def test_model_x_nests_model_0(self):
        noise = np.random.default_rng(8).standard_normal(len(self.returns))
        initial = np.concatenate([self.fit0.params, [0.0]])
        fit = fit_egarch(EgarchSpec(("noise",)), self.returns, noise, initial=initial)
        self.assertGreaterEqual(fit.loglik - self.fit0.loglik, -1e-6)
        with self.assertRaises(VolatilityError):
            fit_egarch(EgarchSpec(("noise",)), self.returns, noise, initial=self.fit0.params)

    def test_covariate_effect(self):
        self.assertEqual("Model X", self.fitX.spec.name)
        self.assertAlmostEqual(0.3, self.fitX.as_dict()["lambda_x"], delta=0.1)
        self.assertGreater(self.fitX.loglik - self.fit0.loglik, 5.0)
        self.assertLess(self.fitX.aic_norm, self.fit0.aic_norm)

    def test_comparison_table(self):
        comparison = compare_models(self.fit0, self.fitX)
        table = comparison.table
        self.assertListEqual(list(TABLE_COLUMNS), list(table.columns))
        self.assertListEqual(
            ["mu", "omega0", "omega", "gamma", "tau", "lambda_x", "loglik", "AIC", "BIC"], table["parameter"].tolist()
        )
        row = table[table["parameter"] == "lambda_x"].iloc[0]
        self.assertTrue(np.isnan(row["model0_coef"]))
        self.assertAlmostEqual(self.fitX.params[5], row["modelX_coef"])
        self.assertAlmostEqual(comparison.loglik_gain, self.fitX.loglik - self.fit0.loglik)
        lines = comparison.summary()
        self.assertTrue(lines[0].startswith("Model 0: loglik="))
        self.assertTrue(any(line.startswith("  lambda_x ") for line in lines))

    def test_comparison_needs_same_sample(self):
        short = fit_egarch(EgarchSpec(), self.returns[:200])
        with self.assertRaises(VolatilityError):
            compare_models(short, self.fitX)

    def test_variance_table(self):
        dates = np.arange(np.datetime64("2015-01-01"), np.datetime64("2015-01-01") + len(self.returns))
        table = variance_table(self.fitX, dates, self.returns)
        self.assertListEqual(list(VARIANCE_COLUMNS), list(table.columns))
        np.testing.assert_allclose(np.sqrt(self.fitX.sigma2), table["sigma"])
        with self.assertRaises(VolatilityError):
            variance_table(self.fitX, dates[:10], self.returns[:10])

    def test_fits_to_dict(self):
        summaries = fits_to_dict([self.fit0, self.fitX])
        self.assertListEqual(["Model 0", "Model X"], [s["model"] for s in summaries])
        self.assertIn("lambda_x", summaries[1]["params"])


class TestHelpers(TestCase):
    def test_significance_stars(self):
        self.assertEqual("***", significance_stars(0.005))
        self.assertEqual("**", significance_stars(0.03))
        self.assertEqual("*", significance_stars(0.07))
        self.assertEqual("", significance_stars(0.2))
        self.assertEqual("", significance_stars(float("nan")))

    def test_covariate_log_returns(self):
        values = covariate_log_returns([0.0, 1.0, 3.0])
        self.assertTrue(np.isnan(values[0]))
        np.testing.assert_allclose([math.log(2), math.log(2)], values[1:])
        with self.assertRaises(NonFinite):
            covariate_log_returns([0.0, -1.0])
