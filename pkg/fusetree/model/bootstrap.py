"""Nonparametric bootstrap of the tree-structured pipeline.

Rows are resampled with replacement and every replicate runs the complete
pipeline, nominal re-ordering included. Replicate results give percentile
intervals for level effects and linear coefficients, co-clustering
similarities between levels and the stability of the original clusters.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fusetree.errors import DesignError, FusetreeError, InsufficientReplicatesError
from fusetree.model.data import Dataset
from fusetree.model.models import StopRule
from fusetree.model.tree import FitSpec, TreeStructuredModel, fit_tree_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Replicate:
    """One bootstrap replicate; ``model`` is None when the fit failed."""

    index: int
    model: Optional[TreeStructuredModel]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.model is not None


@dataclass(frozen=True)
class BootstrapResult:
    """All replicates of one bootstrap run, in index order.

    Attributes:
        replicates: Successful and failed replicates
        seed: Seed the replicate streams derive from
        rule: Stop rule every replicate used
    """

    replicates: Tuple[Replicate, ...]
    seed: int
    rule: StopRule

    @property
    def B(self) -> int:
        return len(self.replicates)

    @property
    def models(self) -> List[TreeStructuredModel]:
        return [rep.model for rep in self.replicates if rep.ok]

    @property
    def n_failures(self) -> int:
        return sum(not rep.ok for rep in self.replicates)

    @property
    def failure_rate(self) -> float:
        return self.n_failures / self.B if self.B else 0.0


@dataclass(frozen=True)
class AlignedEffects:
    """Replicate level effects on the original level codes.

    Attributes:
        variable: Variable name
        labels: Level labels, column j holds level code j + 1
        reference: Level code of the original model's reference level
        effects: Successful replicates x levels, NaN for levels a replicate lacks
        n_failures: Replicates skipped because their fit failed
        n_unanchored: Replicates without the reference level, whose rows are NaN
            apart from the reference column
    """

    variable: str
    labels: Tuple[str, ...]
    reference: int
    effects: np.ndarray
    n_failures: int
    n_unanchored: int = 0


@dataclass(frozen=True)
class SimilarityMatrix:
    """Co-clustering frequencies of the levels of one variable.

    Attributes:
        variable: Variable name
        labels: Level labels
        counts: Number of replicates in which levels i and j share a cell
        B: Number of replicates
    """

    variable: str
    labels: Tuple[str, ...]
    counts: np.ndarray
    B: int

    @property
    def matrix(self) -> np.ndarray:
        """s_ij = n_ij / B with unit diagonal."""
        s = self.counts / self.B
        np.fill_diagonal(s, 1.0)
        return s

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.matrix, index=list(self.labels), columns=list(self.labels))


def run_bootstrap(
    data: Dataset,
    spec: FitSpec,
    rule: StopRule,
    B: int,
    seed: int,
    max_splits: Optional[int] = None,
    resample: bool = True,
) -> BootstrapResult:
    """Fit the pipeline on B row-resampled copies of the data.

    Replicate i draws from the i-th child of ``SeedSequence(seed)``, so a run
    with more replicates extends a shorter one without changing it.

    Args:
        data: Original data
        spec: Fitting settings, ``spec.workers`` threads fit replicates
        rule: Stop rule applied in every replicate
        B: Number of replicates
        seed: Seed of the replicate streams
        max_splits: Path length cap per replicate
        resample: When False, replicates reuse the original rows
    """
    if B < 1:
        raise DesignError("bootstrap needs at least one replicate")
    children = np.random.SeedSequence(seed).spawn(B)

    def one_replicate(i: int) -> Replicate:
        rng = np.random.default_rng(children[i])
        rows = rng.integers(0, data.n, size=data.n) if resample else np.arange(data.n)
        replicate_seed = int(children[i].generate_state(1)[0])
        try:
            model = fit_tree_model(data.take(rows), spec, rule, max_splits, seed=replicate_seed)
        except (FusetreeError, np.linalg.LinAlgError) as e:
            logger.warning("bootstrap replicate %d (seed %d) failed: %s", i, replicate_seed, e)
            return Replicate(i, None, str(e))
        return Replicate(i, model)

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as executor:
            replicates = tuple(executor.map(one_replicate, range(B)))
    else:
        replicates = tuple(one_replicate(i) for i in range(B))
    result = BootstrapResult(replicates, seed, rule)
    logger.info("bootstrap: %d replicates, %d failed", B, result.n_failures)
    return result


def _categorical(original: TreeStructuredModel, var: str):
    variable = original.variable(var)
    if variable.role != "tree" or not variable.kind.categorical:
        raise DesignError(f"'{var}' is not a categorical tree variable")
    return variable


def reference_level(original: TreeStructuredModel, var: str) -> int:
    """Level code whose effect is 0 in the original model."""
    order = original.context.orders.get(var)
    return order.levels_by_rank[0] if order is not None else 1


def align_effects(result: BootstrapResult, original: TreeStructuredModel, var: str) -> AlignedEffects:
    """Express every replicate's level effects against the original reference level.

    Each replicate's effects come from its own partition and ordering and are
    shifted so that the original reference level has effect 0. A replicate
    that never saw the reference level gets a NaN row apart from the reference
    column.
    """
    variable = _categorical(original, var)
    k = variable.kind.k
    ref = reference_level(original, var)
    codes = np.arange(1, k + 1)
    rows = []
    unanchored = 0
    for model in result.models:
        cluster = model.clusters[var]
        observed = np.asarray(model.context.observed[var])
        if observed[ref - 1]:
            effects = cluster.effect(codes) - cluster.effect(np.array([ref]))[0]
            effects = np.where(observed, effects, np.nan)
        else:
            effects = np.full(k, np.nan)
            unanchored += 1
        effects[ref - 1] = 0.0
        rows.append(effects)
    matrix = np.vstack(rows) if rows else np.zeros((0, k))
    if unanchored:
        logger.debug("%d replicates lack reference level %d of %s", unanchored, ref, var)
    return AlignedEffects(var, variable.labels, ref, matrix, result.n_failures, unanchored)


def confidence_intervals(
    samples: np.ndarray,
    level: float = 0.95,
    names: Optional[Sequence[str]] = None,
) -> pd.DataFrame:
    """Percentile intervals per column of a replicates x parameters array.

    Quantiles interpolate linearly between order statistics; NaN entries are
    ignored.

    Raises:
        InsufficientReplicatesError: With fewer than two replicate rows
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < 2:
        raise InsufficientReplicatesError(
            f"intervals need at least 2 successful replicates, got {samples.shape[0]}"
        )
    names = list(names) if names is not None else [str(j) for j in range(samples.shape[1])]
    tail = (1.0 - level) / 2.0
    counts = np.sum(~np.isnan(samples), axis=0)
    lower = np.full(samples.shape[1], np.nan)
    upper = np.full(samples.shape[1], np.nan)
    usable = counts >= 2
    if usable.any():
        bounds = np.nanpercentile(samples[:, usable], [100.0 * tail, 100.0 * (1.0 - tail)], axis=0)
        lower[usable], upper[usable] = bounds
    return pd.DataFrame({"parameter": names, "lower": lower, "upper": upper, "n": counts})


def effect_intervals(aligned: AlignedEffects, level: float = 0.95) -> pd.DataFrame:
    table = confidence_intervals(aligned.effects, level, aligned.labels)
    table.insert(0, "variable", aligned.variable)
    return table


def linear_samples(result: BootstrapResult, original: TreeStructuredModel) -> Tuple[List[str], np.ndarray]:
    """Replicate values of the original model's linear coefficients."""
    names = list(original.linear)
    values = np.array(
        [[model.linear.get(name, np.nan) for name in names] for model in result.models], dtype=float
    ).reshape(len(result.models), len(names))
    return names, values


def linear_intervals(result: BootstrapResult, original: TreeStructuredModel, level: float = 0.95) -> pd.DataFrame:
    names, values = linear_samples(result, original)
    table = confidence_intervals(values, level, names)
    table.insert(1, "estimate", [original.linear[name] for name in names])
    return table


def similarity_and_stability(
    result: BootstrapResult,
    original: TreeStructuredModel,
    var: str,
) -> Tuple[SimilarityMatrix, pd.DataFrame]:
    """Co-clustering similarities and the stability of each original cluster.

    n_ij counts replicates in which levels i and j lie in the same cell; a
    level absent from a replicate gets no count from it and failed replicates
    count nowhere. Stability of a cluster is the mean similarity over its
    unordered level pairs, 1 for singletons.
    """
    variable = _categorical(original, var)
    k = variable.kind.k
    counts = np.zeros((k, k), dtype=int)
    for model in result.models:
        cells = model.clusters[var].level_cells(k)
        observed = np.asarray(model.context.observed[var])
        same = (cells[:, None] == cells[None, :]) & observed[:, None] & observed[None, :]
        counts += same
    similarity = SimilarityMatrix(var, variable.labels, counts, result.B)
    s = similarity.matrix

    rows = []
    cluster = original.clusters[var]
    for j, cell in enumerate(cluster.cells):
        idx = np.asarray(cell) - 1
        if len(idx) > 1:
            upper = np.triu_indices(len(idx), k=1)
            stability = float(np.mean(s[np.ix_(idx, idx)][upper]))
        else:
            stability = 1.0
        rows.append(
            {
                "variable": var,
                "cluster": j + 1,
                "levels": "|".join(cluster.labels[j]),
                "size": len(idx),
                "stability": stability,
            }
        )
    return similarity, pd.DataFrame(rows, columns=["variable", "cluster", "levels", "size", "stability"])


def variable_relevance(result: BootstrapResult, variables: Sequence[str]) -> pd.DataFrame:
    """Fraction of successful replicates giving each tree variable at least one split."""
    models = result.models
    rows = []
    for var in variables:
        hits = sum(any(split.variable == var for split in model.splits) for model in models)
        rows.append({"variable": var, "relevance": hits / len(models) if models else np.nan})
    return pd.DataFrame(rows, columns=["variable", "relevance"])


def replicate_effects(aligned: AlignedEffects, limit: Optional[int] = None) -> pd.DataFrame:
    """Long table (replicate, level, effect) of aligned effects for plotting."""
    effects = aligned.effects if limit is None else aligned.effects[:limit]
    rows = [
        (i + 1, aligned.labels[j], effects[i, j])
        for i in range(effects.shape[0])
        for j in range(effects.shape[1])
    ]
    frame = pd.DataFrame(rows, columns=["replicate", "level", "effect"])
    frame.insert(0, "variable", aligned.variable)
    return frame


def summarize(result: BootstrapResult) -> Dict[str, Any]:
    return {
        "replicates": result.B,
        "failures": result.n_failures,
        "failure_rate": result.failure_rate,
        "seed": result.seed,
        "rule": result.rule.label,
    }
