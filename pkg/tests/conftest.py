"""Shared fixtures for the fusetree test suite."""

import json
from typing import Dict, Optional

import numpy as np
import pandas as pd
import pytest

from fusetree.model.data import Dataset, ingest_dataset
from fusetree.model.glm import get_family
from fusetree.model.models import ColumnSpec, Schema
from fusetree.model.tree import FitSpec


def build_dataset(
    y: np.ndarray,
    columns: Dict[str, np.ndarray],
    specs: Dict[str, dict],
    family: str = "gaussian",
    response: str = "y",
) -> Dataset:
    schema = Schema(response=response, columns={name: ColumnSpec(**spec) for name, spec in specs.items()})
    frame = pd.DataFrame({response: y, **columns})
    return ingest_dataset(frame, schema, family)


@pytest.fixture
def make_dataset():
    """Factory building a Dataset from arrays and column spec dicts."""
    return build_dataset


@pytest.fixture
def gaussian_spec() -> FitSpec:
    return FitSpec(get_family("gaussian"))


@pytest.fixture
def binomial_spec() -> FitSpec:
    return FitSpec(get_family("binomial"))


@pytest.fixture
def two_group_ordinal(make_dataset) -> Dataset:
    """Ordinal z with levels {1,2} at mean 0 and {3,4} at mean 5.

    Every level gets the same ten noise values, so levels within a group have
    identical means.
    """
    rng = np.random.default_rng(0)
    z = np.tile(np.arange(1, 5), 10)
    noise = np.repeat(rng.normal(0.0, 0.1, size=10), 4)
    y = np.where(z <= 2, 0.0, 5.0) + noise
    return make_dataset(y, {"z": z}, {"z": {"kind": "ordinal", "role": "tree", "n_levels": 4}})


@pytest.fixture
def mixed_data(make_dataset) -> Dataset:
    """Ordinal and nominal tree variables, one linear covariate and one smooth term."""
    rng = np.random.default_rng(7)
    n = 240
    o = rng.integers(1, 6, size=n)
    g = rng.choice(["a", "b", "c", "d"], size=n)
    x = rng.normal(size=n)
    t = rng.uniform(0.0, 1.0, size=n)
    effect_o = np.array([0.0, 0.0, 1.5, 1.5, 3.0])[o - 1]
    effect_g = pd.Series(g).map({"a": 0.0, "b": 2.0, "c": 0.0, "d": -2.0}).to_numpy()
    y = effect_o + effect_g + 0.5 * x + np.sin(2 * np.pi * t) + rng.normal(0.0, 0.5, size=n)
    return make_dataset(
        y,
        {"o": o, "g": g, "x": x, "t": t},
        {
            "o": {"kind": "ordinal", "role": "tree", "n_levels": 5},
            "g": {"kind": "nominal", "role": "tree", "levels": ["a", "b", "c", "d"]},
            "x": {"kind": "metric", "role": "linear"},
            "t": {"kind": "metric", "role": "smooth", "basis_dim": 6},
        },
    )


def write_inputs(tmp_path, frame: pd.DataFrame, schema: dict) -> Dict[str, str]:
    """Write a data CSV and schema JSON; return their paths."""
    data_path = tmp_path / "data.csv"
    schema_path = tmp_path / "schema.json"
    frame.to_csv(data_path, index=False)
    schema_path.write_text(json.dumps(schema), encoding="utf-8")
    return {"data": str(data_path), "schema": str(schema_path)}


@pytest.fixture
def cli_inputs(tmp_path):
    """Small data set with an ordinal, a nominal and a linear column, written to disk."""

    def _inputs(n: int = 120, seed: int = 3, binary: bool = False, schema: Optional[dict] = None):
        rng = np.random.default_rng(seed)
        o = rng.integers(1, 5, size=n)
        g = rng.choice(["north", "south", "east"], size=n)
        x = np.round(rng.normal(size=n), 6)
        eta = np.where(o >= 3, 1.0, 0.0) + np.where(g == "east", -1.0, 0.0) + 0.5 * x
        if binary:
            y = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-eta))).astype(int)
        else:
            y = np.round(eta + rng.normal(0.0, 0.5, size=n), 6)
        frame = pd.DataFrame({"y": y, "o": o, "g": g, "x": x})
        schema = schema or {
            "response": "y",
            "columns": {
                "o": {"kind": "ordinal", "role": "tree", "n_levels": 4},
                "g": {"kind": "nominal", "role": "tree"},
                "x": {"kind": "metric", "role": "linear"},
            },
        }
        return write_inputs(tmp_path, frame, schema)

    return _inputs
