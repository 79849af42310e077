"""Tests for the GLM engine."""

import numpy as np
import pytest
from scipy import stats

from fusetree.errors import DesignError, IngestError, NonNestedError, SingularDesignError
from fusetree.model.glm import (
    Penalty,
    TestResult,
    fit_glm,
    get_family,
    information_criterion,
    kfold_indices,
    lr_test,
    predict_response,
    predictive_deviance,
    repeated_cv_deviance,
    wald_test,
)
from fusetree.model.tree import build_model

GAUSSIAN = get_family("gaussian")
BINOMIAL = get_family("binomial")


def random_design(rng, n=60, p=3):
    return np.column_stack([np.ones(n), rng.normal(size=(n, p))])


class TestFitGlm:
    def test_gaussian_matches_least_squares(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            X = random_design(rng)
            y = rng.normal(size=X.shape[0])
            fit = fit_glm(X, y, GAUSSIAN)
            expected, rss, *_ = np.linalg.lstsq(X, y, rcond=None)
            np.testing.assert_allclose(fit.coefficients, expected, rtol=1e-8, atol=1e-10)
            np.testing.assert_allclose(fit.deviance, rss[0], rtol=1e-8)
            assert fit.n_iter == 1 and fit.converged

    def test_binomial_solves_score_equations(self):
        rng = np.random.default_rng(2)
        X = random_design(rng, n=300)
        eta = X @ np.array([0.2, 1.0, -0.5, 0.3])
        y = (rng.uniform(size=300) < 1 / (1 + np.exp(-eta))).astype(float)
        fit = fit_glm(X, y, BINOMIAL)
        _, mu = predict_response(fit, X)
        assert fit.converged
        np.testing.assert_allclose(X.T @ (y - mu), 0.0, atol=1e-5)
        assert fit.dispersion == 1.0

    def test_gaussian_dispersion_uses_residual_df(self):
        rng = np.random.default_rng(3)
        X = random_design(rng, n=50, p=2)
        y = rng.normal(size=50)
        fit = fit_glm(X, y, GAUSSIAN)
        assert fit.dispersion == pytest.approx(fit.deviance / (50 - 3))
        np.testing.assert_allclose(fit.edf_columns, 1.0)

    def test_rank_deficient_design_names_columns(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=30)
        X = np.column_stack([np.ones(30), x, 2 * x])
        with pytest.raises(SingularDesignError) as info:
            fit_glm(X, rng.normal(size=30), GAUSSIAN, names=["(Intercept)", "b", "c"])
        assert len(info.value.columns) == 1
        assert info.value.columns[0] in ("b", "c")
        assert info.value.one_line().startswith("error: singular_design:")

    def test_penalty_restores_rank(self):
        X = np.column_stack([np.ones(10), np.arange(10.0), 2 * np.arange(10.0)])
        penalty = Penalty(((slice(1, 3), np.eye(2), 1.0),))
        fit = fit_glm(X, np.arange(10.0), GAUSSIAN, penalty=penalty)
        assert fit.edf < 3

    def test_binomial_rejects_non_binary_response(self):
        with pytest.raises(IngestError):
            fit_glm(np.ones((3, 1)), np.array([0.0, 1.0, 2.0]), BINOMIAL)

    def test_shape_mismatch(self):
        with pytest.raises(DesignError):
            fit_glm(np.ones((3, 1)), np.ones(4), GAUSSIAN)

    def test_unknown_family(self):
        with pytest.raises(DesignError):
            get_family("poisson")

    def test_record_is_json_ready(self):
        rng = np.random.default_rng(5)
        X = random_design(rng, n=20, p=1)
        record = fit_glm(X, rng.normal(size=20), GAUSSIAN, names=["(Intercept)", "x"]).to_record()
        assert set(record["coefficients"]) == {"(Intercept)", "x"}
        assert record["family"] == "gaussian" and record["link"] == "identity"


class TestTests:
    def setup_method(self):
        rng = np.random.default_rng(6)
        self.X = random_design(rng, n=80, p=2)
        self.y = self.X @ np.array([1.0, 0.5, 0.0]) + rng.normal(size=80)
        self.full = fit_glm(self.X, self.y, GAUSSIAN, names=["(Intercept)", "a", "b"])
        self.reduced = fit_glm(self.X[:, :2], self.y, GAUSSIAN, names=["(Intercept)", "a"])

    def test_lr_statistic_scaled_by_full_dispersion(self):
        result = lr_test(self.full, self.reduced)
        expected = (self.reduced.deviance - self.full.deviance) / self.full.dispersion
        assert result.statistic == pytest.approx(expected)
        assert result.df == 1
        assert result.p_value == pytest.approx(stats.chi2.sf(expected, 1))

    def test_chi_square_reference(self):
        assert TestResult.from_statistic(3.8415, 1).p_value == pytest.approx(0.05, abs=1e-4)

    def test_identical_models(self):
        result = lr_test(self.full, self.full)
        assert result.statistic == 0.0 and result.p_value == 1.0

    def test_non_nested_models_raise(self):
        with pytest.raises(NonNestedError):
            lr_test(self.reduced, self.full)

    def test_wald_statistic(self):
        result = wald_test(self.full, "b")
        j = 2
        expected = self.full.coefficients[j] ** 2 / self.full.covariance[j, j]
        assert result.statistic == pytest.approx(expected)
        assert result.kind == "Wald"
        with pytest.raises(DesignError):
            wald_test(self.full, "missing")

    def test_information_criteria(self):
        aic = information_criterion(self.full, "aic")
        bic = information_criterion(self.full, "bic")
        assert aic == pytest.approx(-2 * self.full.loglik + 2 * 4)
        assert bic == pytest.approx(-2 * self.full.loglik + np.log(80) * 4)

    def test_lr_null_pvalues_are_uniform(self):
        rng = np.random.default_rng(11)
        n, runs = 100, 2000
        hits = 0
        for _ in range(runs):
            X = random_design(rng, n=n, p=1)
            y = rng.normal(size=n)
            full = fit_glm(X, y, GAUSSIAN)
            reduced = fit_glm(X[:, :1], y, GAUSSIAN)
            hits += lr_test(full, reduced).p_value < 0.05
        assert 0.03 <= hits / runs <= 0.07


class TestPrediction:
    def test_predict_checks_columns(self):
        rng = np.random.default_rng(8)
        X = random_design(rng, n=20, p=2)
        fit = fit_glm(X, rng.normal(size=20), GAUSSIAN)
        with pytest.raises(DesignError):
            predict_response(fit, X[:, :2])

    def test_predictive_deviance_on_training_rows_equals_deviance(self):
        rng = np.random.default_rng(9)
        X = random_design(rng, n=40, p=2)
        y = (rng.uniform(size=40) < 0.5).astype(float)
        fit = fit_glm(X, y, BINOMIAL)
        assert predictive_deviance(fit, X, y) == pytest.approx(fit.deviance, rel=1e-10)


class TestCrossValidation:
    def test_folds_partition_rows(self):
        folds = kfold_indices(23, 5, np.random.default_rng(0))
        assert len(folds) == 5
        np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(23))
        assert max(len(f) for f in folds) - min(len(f) for f in folds) <= 1

    def test_repeated_cv_is_seeded(self, two_group_ordinal, gaussian_spec):
        def baseline(train):
            return build_model(train, gaussian_spec, [])

        first = repeated_cv_deviance(two_group_ordinal, baseline, k=5, repetitions=3, seed=42)
        second = repeated_cv_deviance(two_group_ordinal, baseline, k=5, repetitions=3, seed=42)
        assert first.shape == (3,)
        np.testing.assert_array_equal(first, second)

    def test_threaded_repetitions_match_sequential(self, two_group_ordinal, gaussian_spec):
        def split_model(train):
            return build_model(train, gaussian_spec, [("z", 2.0)])

        sequential = repeated_cv_deviance(two_group_ordinal, split_model, 4, 4, seed=3)
        threaded = repeated_cv_deviance(two_group_ordinal, split_model, 4, 4, seed=3, workers=3)
        np.testing.assert_array_equal(sequential, threaded)
