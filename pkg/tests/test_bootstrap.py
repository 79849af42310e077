"""Tests for the bootstrap: replicates, intervals, similarities and stability."""

from dataclasses import replace

import numpy as np
import pytest

import fusetree.model.bootstrap as bootstrap_module
from fusetree.errors import InsufficientReplicatesError, SingularDesignError
from fusetree.model.bootstrap import (
    BootstrapResult,
    Replicate,
    align_effects,
    confidence_intervals,
    effect_intervals,
    linear_intervals,
    reference_level,
    replicate_effects,
    run_bootstrap,
    similarity_and_stability,
    summarize,
    variable_relevance,
)
from fusetree.model.models import StopRule
from fusetree.model.tree import build_model, fit_tree_model

BIC = StopRule.parse("bic")


@pytest.fixture
def hand_result(two_group_ordinal, gaussian_spec):
    """Three replicates with z-splits {2}, {1} and none; the original keeps {2}."""
    models = [
        build_model(two_group_ordinal, gaussian_spec, keys)
        for keys in ([("z", 2.0)], [("z", 1.0)], [])
    ]
    result = BootstrapResult(tuple(Replicate(i, m) for i, m in enumerate(models)), 0, BIC)
    return result, models[0]


@pytest.fixture
def linear_data(make_dataset):
    rng = np.random.default_rng(14)
    z = rng.integers(1, 4, size=90)
    x = rng.normal(size=90)
    y = np.where(z == 3, 2.0, 0.0) + 1.5 * x + rng.normal(0.0, 0.5, size=90)
    return make_dataset(
        y,
        {"z": z, "x": x},
        {"z": {"kind": "ordinal", "role": "tree", "n_levels": 3}, "x": {"kind": "metric", "role": "linear"}},
    )


class TestReplicates:
    def test_without_resampling_reproduces_the_fit(self, two_group_ordinal, gaussian_spec):
        original = fit_tree_model(two_group_ordinal, gaussian_spec, BIC)
        result = run_bootstrap(two_group_ordinal, gaussian_spec, BIC, B=1, seed=0, resample=False)
        replicate = result.models[0]
        assert replicate.keys() == original.keys()
        assert replicate.fit.deviance == pytest.approx(original.fit.deviance)

    def test_seeded_and_extendable(self, two_group_ordinal, gaussian_spec):
        short = run_bootstrap(two_group_ordinal, gaussian_spec, BIC, B=3, seed=5)
        again = run_bootstrap(two_group_ordinal, gaussian_spec, BIC, B=3, seed=5)
        longer = run_bootstrap(two_group_ordinal, gaussian_spec, BIC, B=5, seed=5)
        assert longer.B == 5
        for a, b, c in zip(short.models, again.models, longer.models[:3]):
            assert a.keys() == b.keys() == c.keys()
            assert a.fit.deviance == b.fit.deviance == c.fit.deviance

    def test_threads_give_the_same_replicates(self, two_group_ordinal, gaussian_spec):
        sequential = run_bootstrap(two_group_ordinal, gaussian_spec, BIC, B=4, seed=2)
        threaded = run_bootstrap(two_group_ordinal, replace(gaussian_spec, workers=3), BIC, B=4, seed=2)
        assert [m.keys() for m in sequential.models] == [m.keys() for m in threaded.models]

    def test_failed_replicate_is_recorded(self, two_group_ordinal, gaussian_spec, monkeypatch):
        calls = []
        real = bootstrap_module.fit_tree_model

        def flaky(*args, **kwargs):
            calls.append(1)
            if len(calls) == 2:
                raise SingularDesignError(["z>2"])
            return real(*args, **kwargs)

        monkeypatch.setattr(bootstrap_module, "fit_tree_model", flaky)
        result = run_bootstrap(two_group_ordinal, gaussian_spec, BIC, B=3, seed=1)
        assert result.n_failures == 1
        assert not result.replicates[1].ok
        assert "rank deficient" in result.replicates[1].error
        assert len(result.models) == 2
        assert summarize(result)["failure_rate"] == pytest.approx(1 / 3)


class TestIntervals:
    def test_percentiles_interpolate(self):
        table = confidence_intervals(np.arange(1.0, 1001.0), 0.95, ["theta"])
        assert table.loc[0, "lower"] == pytest.approx(25.975)
        assert table.loc[0, "upper"] == pytest.approx(975.025)
        assert table.loc[0, "n"] == 1000

    def test_constant_samples(self):
        table = confidence_intervals(np.full((10, 2), 0.7))
        np.testing.assert_allclose(table["lower"], 0.7)
        np.testing.assert_allclose(table["upper"], 0.7)

    def test_needs_two_replicates(self):
        with pytest.raises(InsufficientReplicatesError):
            confidence_intervals(np.array([[1.0, 2.0]]))

    def test_wider_at_higher_level(self):
        samples = np.random.default_rng(3).normal(size=(200, 3))
        narrow = confidence_intervals(samples, 0.8)
        wide = confidence_intervals(samples, 0.95)
        assert np.all(wide["lower"] <= narrow["lower"])
        assert np.all(wide["upper"] >= narrow["upper"])

    def test_nan_entries_ignored(self):
        samples = np.array([[1.0, np.nan], [2.0, np.nan], [3.0, 4.0]])
        table = confidence_intervals(samples)
        assert list(table["n"]) == [3, 1]
        assert np.isnan(table.loc[1, "lower"])

    def test_linear_coefficients(self, linear_data, gaussian_spec):
        original = fit_tree_model(linear_data, gaussian_spec, BIC)
        result = run_bootstrap(linear_data, gaussian_spec, BIC, B=20, seed=11)
        table = linear_intervals(result, original)
        assert list(table.columns) == ["parameter", "estimate", "lower", "upper", "n"]
        row = table.iloc[0]
        assert row["parameter"] == "x"
        assert row["lower"] <= row["estimate"] <= row["upper"]


class TestAlignment:
    def test_reference_column_is_zero(self, hand_result):
        result, original = hand_result
        aligned = align_effects(result, original, "z")
        assert aligned.reference == reference_level(original, "z") == 1
        assert aligned.effects.shape == (3, 4)
        np.testing.assert_array_equal(aligned.effects[:, 0], 0.0)
        np.testing.assert_array_equal(aligned.effects[2], 0.0)

    def test_effect_intervals_table(self, hand_result):
        result, original = hand_result
        table = effect_intervals(align_effects(result, original, "z"))
        assert list(table.columns) == ["variable", "parameter", "lower", "upper", "n"]
        assert list(table["parameter"]) == ["1", "2", "3", "4"]

    def test_unobserved_levels_are_nan(self, two_group_ordinal, gaussian_spec):
        original = build_model(two_group_ordinal, gaussian_spec, [("z", 2.0)])
        subset = two_group_ordinal.subset(two_group_ordinal.values["z"] != 4)
        replicate = build_model(subset, gaussian_spec, [("z", 2.0)])
        result = BootstrapResult((Replicate(0, replicate), Replicate(1, original)), 0, BIC)
        aligned = align_effects(result, original, "z")
        assert np.isnan(aligned.effects[0, 3])
        assert not np.isnan(aligned.effects[1, 3])

    def test_replicate_without_reference_level_is_unanchored(self, make_dataset, gaussian_spec):
        rng = np.random.default_rng(4)
        z = np.tile(np.arange(1, 5), 10)
        y = np.array([0.0, 5.0, 5.0, 10.0])[z - 1] + np.repeat(rng.normal(0.0, 0.1, size=10), 4)
        data = make_dataset(y, {"z": z}, {"z": {"kind": "nominal", "role": "tree", "n_levels": 4}})
        original = build_model(data, gaussian_spec, [("z", 1.0)])
        replicate = build_model(data.subset(data.values["z"] != 1), gaussian_spec, [("z", 2.0)])
        result = BootstrapResult((Replicate(0, replicate), Replicate(1, original)), 0, BIC)
        aligned = align_effects(result, original, "z")
        assert aligned.reference == 1
        assert aligned.n_unanchored == 1
        assert aligned.effects[0, 0] == 0.0
        assert np.isnan(aligned.effects[0, 1:]).all()
        np.testing.assert_allclose(aligned.effects[1], [0.0, 20 / 3, 20 / 3, 20 / 3], atol=1e-6)
        table = effect_intervals(aligned)
        assert list(table["n"]) == [2, 1, 1, 1]

    def test_long_table(self, hand_result):
        result, original = hand_result
        frame = replicate_effects(align_effects(result, original, "z"), limit=2)
        assert list(frame.columns) == ["variable", "replicate", "level", "effect"]
        assert len(frame) == 2 * 4


class TestSimilarity:
    def test_hand_counts(self, hand_result):
        result, original = hand_result
        similarity, stability = similarity_and_stability(result, original, "z")
        s = similarity.matrix
        assert s[0, 1] == pytest.approx(2 / 3)
        assert s[2, 3] == pytest.approx(1.0)
        assert s[1, 2] == pytest.approx(2 / 3)
        assert s[0, 3] == pytest.approx(1 / 3)
        np.testing.assert_array_equal(np.diag(s), 1.0)
        np.testing.assert_allclose(s, s.T)
        assert list(stability["stability"]) == pytest.approx([2 / 3, 1.0])
        assert list(stability["levels"]) == ["1|2", "3|4"]

    def test_failed_replicates_count_toward_b(self, hand_result):
        result, original = hand_result
        padded = BootstrapResult((*result.replicates, Replicate(3, None, "failed")), 0, BIC)
        similarity, _ = similarity_and_stability(padded, original, "z")
        assert similarity.B == 4
        assert similarity.matrix[2, 3] == pytest.approx(3 / 4)

    def test_singleton_cluster_is_stable(self, hand_result):
        result, _ = hand_result
        original = result.models[1]
        _, stability = similarity_and_stability(result, original, "z")
        assert stability.loc[0, "size"] == 1
        assert stability.loc[0, "stability"] == 1.0

    def test_similarity_frame_is_labelled(self, hand_result):
        result, original = hand_result
        similarity, _ = similarity_and_stability(result, original, "z")
        frame = similarity.to_frame()
        assert list(frame.index) == list(frame.columns) == ["1", "2", "3", "4"]

    def test_relevance(self, hand_result):
        result, _ = hand_result
        table = variable_relevance(result, ["z"])
        assert table.loc[0, "relevance"] == pytest.approx(2 / 3)
