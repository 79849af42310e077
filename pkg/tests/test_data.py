"""Tests for ingestion, level ordering, candidate splits and design assembly."""

import json

import numpy as np
import pandas as pd
import pytest

from fusetree.errors import DesignError, IngestError, SchemaError
from fusetree.model.data import (
    DesignContext,
    build_design,
    candidate_splits,
    ingest_dataset,
    nominal_ordering,
    write_dataset,
)
from fusetree.model.models import Schema

SCHEMA = Schema.model_validate(
    {
        "response": "y",
        "columns": {
            "size": {"kind": "ordinal", "role": "tree", "levels": ["small", "medium", "large"]},
            "color": {"kind": "nominal", "role": "tree"},
            "flag": {"kind": "binary", "role": "linear"},
            "w": {"kind": "metric", "role": "linear"},
        },
    }
)


def frame(**overrides):
    base = {
        "y": ["1.5", "2.0", "0.5", "3.0", "2.5", "1.0"],
        "size": ["small", "medium", "large", "small", "medium", "large"],
        "color": ["red", "blue", "red", "green", "blue", "green"],
        "flag": ["0", "1", "1", "0", "0", "1"],
        "w": ["0.1", "0.2", "0.3", "0.4", "0.5", "0.6"],
    }
    base.update(overrides)
    return pd.DataFrame(base)


class TestIngest:
    def test_codes_and_labels(self):
        data = ingest_dataset(frame(), SCHEMA)
        assert data.n == 6
        np.testing.assert_array_equal(data.values["size"], [1, 2, 3, 1, 2, 3])
        assert data.variable("color").labels == ("red", "blue", "green")
        np.testing.assert_array_equal(data.values["color"], [1, 2, 1, 3, 2, 3])
        assert data.variable("size").kind.k == 3
        assert data.names("tree") == ["size", "color"]
        assert data.names("linear") == ["flag", "w"]

    def test_integer_coded_levels(self):
        schema = Schema.model_validate(
            {"response": "y", "columns": {"z": {"kind": "ordinal", "role": "tree", "n_levels": 3}}}
        )
        data = ingest_dataset(pd.DataFrame({"y": ["1", "2", "3"], "z": ["1", "2.0", " 3 "]}), schema)
        np.testing.assert_array_equal(data.values["z"], [1, 2, 3])

    def test_missing_value(self):
        with pytest.raises(IngestError, match="missing value") as info:
            ingest_dataset(frame(w=["0.1", "", "0.3", "0.4", "0.5", "0.6"]), SCHEMA)
        assert info.value.row == 2 and info.value.column == "w"

    def test_unknown_level(self):
        with pytest.raises(IngestError, match="unknown level 'huge'"):
            ingest_dataset(frame(size=["small", "medium", "huge", "small", "medium", "large"]), SCHEMA)

    def test_empty_level(self):
        with pytest.raises(IngestError, match="empty level 'large'"):
            ingest_dataset(frame(size=["small", "medium", "medium", "small", "medium", "small"]), SCHEMA)

    def test_non_numeric_response(self):
        with pytest.raises(IngestError, match="non-numeric response"):
            ingest_dataset(frame(y=["1", "2", "x", "4", "5", "6"]), SCHEMA)

    def test_binary_column_must_be_zero_one(self):
        with pytest.raises(IngestError, match="not 0/1"):
            ingest_dataset(frame(flag=["0", "1", "2", "0", "0", "1"]), SCHEMA)

    def test_binomial_response_validated(self):
        with pytest.raises(IngestError, match="0/1"):
            ingest_dataset(frame(), SCHEMA, family="binomial")
        data = ingest_dataset(frame(y=["0", "1", "1", "0", "1", "0"]), SCHEMA, family="binomial")
        assert set(data.response) == {0.0, 1.0}

    def test_schema_column_absent_from_header(self):
        with pytest.raises(SchemaError, match="w"):
            ingest_dataset(frame().drop(columns=["w"]), SCHEMA)

    def test_arrays_are_read_only(self):
        data = ingest_dataset(frame(), SCHEMA)
        with pytest.raises(ValueError):
            data.response[0] = 10.0
        with pytest.raises(ValueError):
            data.values["size"][0] = 2

    def test_round_trip_through_csv(self, tmp_path):
        data = ingest_dataset(frame(), SCHEMA)
        path = tmp_path / "round.csv"
        write_dataset(data, str(path))
        again = ingest_dataset(str(path), data.schema())
        np.testing.assert_array_equal(again.response, data.response)
        for name in data.values:
            np.testing.assert_array_equal(again.values[name], data.values[name])

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(IngestError, match="cannot read"):
            ingest_dataset(str(tmp_path / "absent.csv"), SCHEMA)


class TestSchema:
    def test_smooth_requires_metric(self):
        with pytest.raises(ValueError):
            Schema.model_validate({"response": "y", "columns": {"z": {"kind": "ordinal", "role": "smooth"}}})

    def test_ordinal_needs_levels(self):
        with pytest.raises(ValueError):
            Schema.model_validate({"response": "y", "columns": {"z": {"kind": "ordinal", "role": "tree"}}})

    def test_response_cannot_be_predictor(self):
        with pytest.raises(ValueError):
            Schema.model_validate({"response": "y", "columns": {"y": {"kind": "metric", "role": "linear"}}})

    def test_from_file_errors(self, tmp_path):
        path = tmp_path / "schema.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(SchemaError, match="not valid JSON"):
            Schema.from_file(str(path))
        path.write_text(json.dumps({"response": "y", "columns": {"z": {"kind": "bogus", "role": "tree"}}}))
        with pytest.raises(SchemaError, match="invalid schema"):
            Schema.from_file(str(path))
        with pytest.raises(SchemaError, match="cannot read"):
            Schema.from_file(str(tmp_path / "missing.json"))


class TestOrdering:
    def test_levels_ordered_by_mean(self, make_dataset):
        g = np.array(["a", "b", "c", "a", "b", "c"])
        y = np.array([3.0, 1.0, 2.0, 3.0, 1.0, 2.0])
        data = make_dataset(y, {"g": g}, {"g": {"kind": "nominal", "role": "tree", "levels": ["a", "b", "c"]}})
        order = nominal_ordering(data, "g")
        assert order.levels_by_rank == (2, 3, 1)
        np.testing.assert_array_equal(order.rank_of_level[1:], [3, 1, 2])
        np.testing.assert_allclose(order.means, [3.0, 1.0, 2.0])

    def test_ties_resolve_by_level_code(self, make_dataset):
        g = np.array(["a", "b", "c", "d"])
        y = np.array([1.0, 0.0, 1.0, 0.0])
        data = make_dataset(y, {"g": g}, {"g": {"kind": "nominal", "role": "tree", "levels": ["a", "b", "c", "d"]}})
        assert nominal_ordering(data, "g").levels_by_rank == (2, 4, 1, 3)

    def test_unobserved_levels_rank_last(self, make_dataset):
        g = np.array(["a", "b", "c", "a", "b", "c"])
        y = np.array([5.0, 1.0, 3.0, 5.0, 1.0, 3.0])
        data = make_dataset(y, {"g": g}, {"g": {"kind": "nominal", "role": "tree", "levels": ["a", "b", "c"]}})
        subset = data.take(np.array([0, 2, 3, 5]))
        order = nominal_ordering(subset, "g")
        assert order.levels_by_rank == (3, 1, 2)
        assert np.isnan(order.means[1])


class TestCandidates:
    def test_ordinal_thresholds(self, two_group_ordinal):
        split_set = candidate_splits(two_group_ordinal, "z")
        np.testing.assert_array_equal(split_set.candidates, [1.0, 2.0, 3.0])
        assert split_set.m == 3 and split_set.order is None

    def test_metric_thresholds_drop_maximum(self, make_dataset):
        x = np.array([0.5, 1.5, 1.5, 3.0])
        data = make_dataset(np.arange(4.0), {"x": x}, {"x": {"kind": "metric", "role": "tree"}})
        np.testing.assert_array_equal(candidate_splits(data, "x").candidates, [0.5, 1.5])

    def test_constant_indicators_dropped(self, two_group_ordinal):
        subset = two_group_ordinal.subset(two_group_ordinal.values["z"] <= 2)
        np.testing.assert_array_equal(candidate_splits(subset, "z").candidates, [1.0])

    def test_only_tree_variables(self, mixed_data):
        with pytest.raises(DesignError):
            candidate_splits(mixed_data, "x")

    def test_nominal_thresholds_use_ranks(self, mixed_data):
        split_set = candidate_splits(mixed_data, "g")
        np.testing.assert_array_equal(split_set.candidates, [1.0, 2.0, 3.0])
        assert split_set.order is not None
        assert split_set.order.levels_by_rank[0] == 4


class TestDesign:
    def test_column_order(self, mixed_data):
        design = build_design(mixed_data, [("g", 2.0), ("o", 1.0)])
        assert design.names[:4] == ("(Intercept)", "g>rank2", "o>1", "x")
        assert design.names[4] == "s(t).1"
        assert design.matrix.shape == (mixed_data.n, 4 + 5)
        assert design.fixed_columns == 4
        assert list(design.smooth_blocks) == ["t"]
        np.testing.assert_array_equal(design.matrix[:, 2], (mixed_data.values["o"] > 1).astype(float))

    def test_nominal_indicator_follows_order(self, mixed_data):
        context = DesignContext.fit(mixed_data)
        design = build_design(mixed_data, [("g", 1.0)], context)
        lowest = context.orders["g"].levels_by_rank[0]
        expected = (mixed_data.values["g"] != lowest).astype(float)
        np.testing.assert_array_equal(design.matrix[:, 1], expected)

    def test_duplicate_split_rejected(self, two_group_ordinal):
        with pytest.raises(DesignError, match="duplicate"):
            build_design(two_group_ordinal, [("z", 2.0), ("z", 2)])

    def test_split_on_non_tree_variable(self, mixed_data):
        with pytest.raises(DesignError):
            build_design(mixed_data, [("x", 0.0)])

    def test_penalty_uses_lambdas(self, mixed_data, two_group_ordinal):
        assert build_design(mixed_data, []).penalty({"t": 2.5}).lambdas == (2.5,)
        assert build_design(two_group_ordinal, []).penalty({}) is None
