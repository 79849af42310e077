"""Artifact files written by CLI commands.

Every artifact carries the run's config hash and seed: JSON documents in a
``provenance`` member, tables in a leading ``#`` comment line.
"""

import json
import logging
import math
import os
from typing import Any, Dict

import numpy as np
import pandas as pd

from fusetree.model.models import RunConfig
from fusetree.model.tree import TreeStructuredModel

logger = logging.getLogger(__name__)


def plain(value: Any) -> Any:
    """Convert numpy scalars and arrays to JSON types; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


class ArtifactWriter:
    """Writes provenance-stamped files into one output directory."""

    def __init__(self, out: str, config: RunConfig):
        self.out = out
        self.config = config
        self.config_hash = config.config_hash()
        os.makedirs(out, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def provenance(self) -> Dict[str, Any]:
        return {"config_hash": self.config_hash, "seed": self.config.seed, "command": self.config.command}

    def json(self, name: str, record: Dict[str, Any]) -> str:
        payload = plain({**record, "provenance": self.provenance()})
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(payload, sort_keys=True, indent=2, allow_nan=False))
            f.write("\n")
        logger.debug("wrote %s", path)
        return path

    def table(self, name: str, frame: pd.DataFrame) -> str:
        path = self.path(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# config_hash={self.config_hash},seed={self.config.seed}\n")
            frame.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
        logger.debug("wrote %s", path)
        return path

    def run_config(self) -> str:
        return self.json("run_config.json", {"config": self.config.canonical()})


def partitions_frame(model: TreeStructuredModel) -> pd.DataFrame:
    """One row per cell of every tree variable."""
    rows = []
    for var, cluster in model.clusters.items():
        if cluster.cells:
            for j, (labels, effect) in enumerate(zip(cluster.labels, cluster.effects)):
                rows.append(
                    {"variable": var, "kind": cluster.kind, "cell": j + 1, "levels": "|".join(labels),
                     "lower": None, "upper": None, "effect": effect}
                )
        else:
            for j, ((lower, upper), effect) in enumerate(zip(cluster.intervals, cluster.effects)):
                rows.append(
                    {"variable": var, "kind": cluster.kind, "cell": j + 1, "levels": "",
                     "lower": lower, "upper": upper, "effect": effect}
                )
    return pd.DataFrame(rows, columns=["variable", "kind", "cell", "levels", "lower", "upper", "effect"])
