"""Tree-structured clustering of categorical predictor levels.

Splits are selected forward across all tree-role variables. Every candidate
model is refitted on all data with the linear and smooth terms, the candidate
with minimal deviance enters, and a stopping rule decides how many of the
selected splits are kept. The kept splits define, per variable, a partition of
the levels into clusters sharing one effect.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fusetree import constants
from fusetree.config import Settings
from fusetree.errors import ConfigError, NonNestedError, SingularDesignError
from fusetree.model.data import (
    CategoryOrder,
    Dataset,
    DesignContext,
    DesignMatrix,
    SplitKey,
    SplitSet,
    Variable,
    build_design,
    candidate_splits,
    split_indicator,
)
from fusetree.model.glm import (
    Family,
    GlmFit,
    TestResult,
    fit_glm,
    get_family,
    information_criterion,
    kfold_indices,
    lr_test,
    predict_response,
    predictive_deviance,
    wald_test,
)
from fusetree.model.models import StopRule
from fusetree.model.smooth import SmoothTermFit, select_lambdas

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitSpec:
    """Settings of one fitting pipeline.

    Attributes:
        family: Response family
        grid: Smoothing parameter grid
        workers: Thread pool size for candidate fits and folds
        max_iter: IRLS iteration cap
        tol: IRLS convergence tolerance
    """

    family: Family
    grid: np.ndarray = field(default_factory=lambda: constants.LAMBDA_GRID, repr=False)
    workers: int = 1
    max_iter: int = constants.MAX_ITER
    tol: float = constants.DEVIANCE_TOLERANCE

    @classmethod
    def create(cls, family: str, settings: Optional[Settings] = None) -> "FitSpec":
        settings = settings or Settings()
        return cls(
            family=get_family(family),
            workers=settings.workers,
            max_iter=settings.max_iter,
            tol=settings.tolerance,
        )


@dataclass(frozen=True)
class Split:
    """One selected split I(z > threshold).

    Attributes:
        variable: Variable name
        threshold: Threshold (rank threshold for nominal variables)
        step: Step at which the split entered
        column: Design column name
        effect: Coefficient of the split in the final model
    """

    variable: str
    threshold: float
    step: int
    column: str
    effect: float = float("nan")

    @property
    def key(self) -> SplitKey:
        return (self.variable, self.threshold)


@dataclass(frozen=True)
class TraceStep:
    """Model after ``step`` splits.

    Attributes:
        step: Number of splits in the model
        split: Split that entered at this step (None for the null model)
        fit: Fit of the model with all splits so far
        lambdas: Smoothing parameters used at this step
        lr: Likelihood-ratio test of the entering split
        wald: Wald test of the entering split
        reference_deviance: Deviance of the previous model at this step's lambdas
    """

    step: int
    split: Optional[Split]
    fit: GlmFit
    lambdas: Dict[str, float]
    lr: Optional[TestResult]
    wald: Optional[TestResult]
    reference_deviance: float

    @property
    def deviance(self) -> float:
        return self.fit.deviance

    def p_value(self, test: str = "lr") -> Optional[float]:
        result = self.wald if test == "wald" else self.lr
        return None if result is None else result.p_value


@dataclass(frozen=True)
class SplitTrace:
    """Ordered sequence of selected splits with per-step fits.

    Attributes:
        steps: Null model followed by one entry per selected split
        split_sets: Candidate thresholds per tree variable
        context: Orders and bases the path was built with
        m_total: Total number of candidate splits
        stop_reason: Why the path ended
    """

    steps: Tuple[TraceStep, ...]
    split_sets: Dict[str, SplitSet]
    context: DesignContext
    m_total: int
    stop_reason: str

    @property
    def n_splits(self) -> int:
        return len(self.steps) - 1

    @property
    def splits(self) -> Tuple[Split, ...]:
        return tuple(step.split for step in self.steps[1:])

    def keys(self, length: Optional[int] = None) -> List[SplitKey]:
        """First ``length`` split keys (all by default)."""
        return [split.key for split in self.splits[:length]]

    def p_values(self, test: str = "lr") -> np.ndarray:
        return np.array([step.p_value(test) for step in self.steps[1:]], dtype=float)

    def deviances(self) -> np.ndarray:
        return np.array([step.deviance for step in self.steps])


@dataclass(frozen=True)
class ClusterSet:
    """Partition of one tree variable into cells sharing an effect.

    Attributes:
        variable: Variable name
        kind: Scale level name
        thresholds: Sorted selected thresholds (ranks for nominal variables)
        effects: Effect per cell, the lowest cell is the reference with effect 0
        cells: Level codes per cell for categorical variables
        labels: Level labels per cell for categorical variables
        order: Level ordering for nominal variables
    """

    variable: str
    kind: str
    thresholds: Tuple[float, ...]
    effects: Tuple[float, ...]
    cells: Tuple[Tuple[int, ...], ...] = ()
    labels: Tuple[Tuple[str, ...], ...] = ()
    order: Optional[CategoryOrder] = None

    def cell_index(self, values: np.ndarray) -> np.ndarray:
        """Cell of each value (level codes or metric values)."""
        scale = self.order.ranks(values) if self.order is not None else values
        return np.searchsorted(np.asarray(self.thresholds, dtype=float), scale, side="left")

    def effect(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(self.effects)[self.cell_index(values)]

    @property
    def intervals(self) -> Tuple[Tuple[float, float], ...]:
        """Half-open intervals (lower, upper] of the cells on the split scale."""
        bounds = (-math.inf, *self.thresholds, math.inf)
        return tuple(zip(bounds[:-1], bounds[1:]))

    def level_cells(self, k: int) -> np.ndarray:
        """Cell index of each level code 1..k."""
        return self.cell_index(np.arange(1, k + 1))


def _partition(variable: Variable, splits: Sequence[Split], context: DesignContext) -> ClusterSet:
    chosen = sorted(splits, key=lambda s: s.threshold)
    thresholds = tuple(s.threshold for s in chosen)
    effects = tuple(float(e) for e in np.concatenate([[0.0], np.cumsum([s.effect for s in chosen])]))
    order = context.orders.get(variable.name)
    if not variable.kind.categorical:
        return ClusterSet(variable.name, variable.kind.name, thresholds, effects)
    k = variable.kind.k
    scale = np.arange(1, k + 1)
    level_at = np.asarray(order.levels_by_rank) if order is not None else scale
    cell_of_position = np.searchsorted(np.asarray(thresholds, dtype=float), scale, side="left")
    cells = tuple(
        tuple(sorted(int(c) for c in level_at[cell_of_position == j]))
        for j in range(len(thresholds) + 1)
    )
    labels = tuple(tuple(variable.labels[c - 1] for c in cell) for cell in cells)
    return ClusterSet(variable.name, variable.kind.name, thresholds, effects, cells, labels, order)


@dataclass(frozen=True)
class TreeStructuredModel:
    """Fitted tree-structured model.

    The predictor is the intercept plus one step function per tree variable,
    the linear terms and the smooth terms.
    """

    response_name: str
    variables: Tuple[Variable, ...]
    family: Family
    fit: GlmFit
    splits: Tuple[Split, ...]
    clusters: Dict[str, ClusterSet]
    linear: Dict[str, float]
    smooth: Dict[str, SmoothTermFit]
    lambdas: Dict[str, float]
    context: DesignContext
    trace: Optional[SplitTrace] = field(default=None, repr=False)
    rule: str = ""

    @property
    def n_splits(self) -> int:
        return len(self.splits)

    @property
    def intercept(self) -> float:
        return self.fit.coef()[constants.INTERCEPT]

    def variable(self, name: str) -> Variable:
        return next(var for var in self.variables if var.name == name)

    def keys(self) -> List[SplitKey]:
        return [split.key for split in self.splits]

    def level_effects(self, var: str) -> np.ndarray:
        """Effect of each level code 1..k relative to the lowest cell.

        Levels unobserved in the fitting data are NaN.
        """
        variable = self.variable(var)
        cluster = self.clusters[var]
        effects = np.asarray(cluster.effects)[cluster.level_cells(variable.kind.k)]
        observed = np.asarray(self.context.observed.get(var, (True,) * variable.kind.k))
        return np.where(observed, effects, np.nan)

    def design(self, data: Dataset) -> DesignMatrix:
        return build_design(data, self.keys(), self.context)

    def linear_predictor(self, data: Dataset) -> np.ndarray:
        eta, _ = predict_response(self.fit, self.design(data).matrix)
        return eta

    def reconstruct_eta(self, data: Dataset) -> np.ndarray:
        """Predictor assembled term by term from clusters, linear and smooth terms."""
        eta = np.full(data.n, self.intercept)
        for var, cluster in self.clusters.items():
            eta += cluster.effect(data.values[var])
        for var in self.variables:
            if var.role != "linear":
                continue
            values = data.values[var.name]
            if var.kind.categorical:
                for code in range(2, var.kind.k + 1):
                    eta += self.linear[f"{var.name}={var.labels[code - 1]}"] * (values == code)
            else:
                eta += self.linear[var.name] * values
        for var, term in self.smooth.items():
            eta += term.evaluate(data.values[var])
        return eta

    def predict(self, data: Dataset) -> np.ndarray:
        _, mu = predict_response(self.fit, self.design(data).matrix)
        return mu

    def predictive_deviance(self, data: Dataset) -> float:
        return predictive_deviance(self.fit, self.design(data).matrix, data.response)

    def to_record(self) -> Dict[str, Any]:
        """JSON-ready description of the model."""
        partitions = {}
        for var, cluster in self.clusters.items():
            if cluster.cells:
                cells = [
                    {"cell": j + 1, "levels": list(labels), "effect": effect}
                    for j, (labels, effect) in enumerate(zip(cluster.labels, cluster.effects))
                ]
            else:
                cells = [
                    {"cell": j + 1, "lower": _finite(lo), "upper": _finite(hi), "effect": effect}
                    for j, ((lo, hi), effect) in enumerate(zip(cluster.intervals, cluster.effects))
                ]
            partitions[var] = {"kind": cluster.kind, "thresholds": list(cluster.thresholds), "cells": cells}
        record = {
            "response": self.response_name,
            "family": self.family.name,
            "rule": self.rule,
            "n_splits": self.n_splits,
            "intercept": self.intercept,
            "splits": [
                {
                    "step": s.step,
                    "variable": s.variable,
                    "threshold": s.threshold,
                    "column": s.column,
                    "effect": s.effect,
                }
                for s in self.splits
            ],
            "partitions": partitions,
            "linear": self.linear,
            "smooth": {
                var: {
                    "lambda": term.lam,
                    "edf": term.edf,
                    "knots": term.basis.knots.tolist(),
                    "coefficients": term.coefficients.tolist(),
                }
                for var, term in self.smooth.items()
            },
            "fit": self.fit.to_record(),
        }
        if self.trace is not None:
            record["trace"] = {
                "m_total": self.trace.m_total,
                "stop_reason": self.trace.stop_reason,
                "steps": [
                    {
                        "step": step.step,
                        "variable": step.split.variable if step.split else None,
                        "threshold": step.split.threshold if step.split else None,
                        "deviance": step.deviance,
                        "p_value": step.p_value("lr"),
                        "p_value_wald": step.p_value("wald"),
                    }
                    for step in self.trace.steps
                ],
            }
        return record


def _finite(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


class _PathBuilder:
    """Fits candidate models for one data set and design context."""

    def __init__(self, data: Dataset, spec: FitSpec, context: DesignContext, split_sets: Dict[str, SplitSet]):
        self.data = data
        self.spec = spec
        self.context = context
        self.split_sets = split_sets

    def design(self, keys: Sequence[SplitKey]) -> DesignMatrix:
        return build_design(self.data, keys, self.context)

    def lambdas(self, design: DesignMatrix) -> Dict[str, float]:
        if not design.smooth_blocks:
            return {}
        return select_lambdas(
            design.matrix, self.data.response, self.spec.family, design.smooth_blocks,
            names=design.names, grid=self.spec.grid, max_iter=self.spec.max_iter, tol=self.spec.tol,
        )

    def fit(self, design: DesignMatrix, lambdas: Dict[str, float]) -> GlmFit:
        return fit_glm(
            design.matrix, self.data.response, self.spec.family,
            penalty=design.penalty(lambdas), names=design.names,
            max_iter=self.spec.max_iter, tol=self.spec.tol,
        )

    def candidates(self, selected: Sequence[SplitKey]) -> List[SplitKey]:
        """Unselected candidates in schema variable order, ascending threshold."""
        taken = set(selected)
        return [
            (var, float(c))
            for var, split_set in self.split_sets.items()
            for c in split_set.candidates
            if (var, float(c)) not in taken
        ]

    def candidate_deviances(
        self, design: DesignMatrix, lambdas: Dict[str, float], candidates: Sequence[SplitKey]
    ) -> np.ndarray:
        """Deviance of each candidate model; NaN where the indicator is collinear."""
        if not candidates:
            return np.zeros(0)
        C = np.column_stack([split_indicator(self.data, var, c, self.context) for var, c in candidates])
        if self.spec.family.name == "gaussian" and not design.smooth_blocks:
            return self._least_squares_deviances(design.matrix, C)

        penalty = design.penalty(lambdas)

        def deviance_of(j: int) -> float:
            X = np.hstack([design.matrix, C[:, j : j + 1]])
            try:
                fit = fit_glm(
                    X, self.data.response, self.spec.family, penalty=penalty,
                    names=(*design.names, "candidate"), max_iter=self.spec.max_iter, tol=self.spec.tol,
                )
            except SingularDesignError:
                return float("nan")
            return fit.deviance

        if self.spec.workers > 1:
            with ThreadPoolExecutor(max_workers=self.spec.workers) as executor:
                return np.array(list(executor.map(deviance_of, range(C.shape[1]))))
        return np.array([deviance_of(j) for j in range(C.shape[1])])

    def _least_squares_deviances(self, X: np.ndarray, C: np.ndarray) -> np.ndarray:
        """Residual sums of squares after adding each column of C to X."""
        Q, _ = np.linalg.qr(X)
        y = self.data.response
        resid = y - Q @ (Q.T @ y)
        C_resid = C - Q @ (Q.T @ C)
        norms = np.sum(C_resid**2, axis=0)
        admissible = norms > constants.RANK_TOLERANCE**2 * np.sum(C**2, axis=0)
        drop = np.divide((C_resid.T @ resid) ** 2, norms, out=np.zeros_like(norms), where=admissible)
        return np.where(admissible, resid @ resid - drop, np.nan)

    def step(
        self,
        selected: Sequence[SplitKey],
        design: DesignMatrix,
        prefix_fit: GlmFit,
        lambdas: Dict[str, float],
    ) -> Optional[Tuple[SplitKey, DesignMatrix, GlmFit, TestResult, TestResult]]:
        candidates = self.candidates(selected)
        deviances = self.candidate_deviances(design, lambdas, candidates)
        while np.any(np.isfinite(deviances)):
            lowest = np.nanmin(deviances)
            tie = constants.TIE_TOLERANCE * max(1.0, abs(lowest))
            best = int(np.flatnonzero(deviances <= lowest + tie)[0])
            key = candidates[best]
            new_design = self.design([*selected, key])
            try:
                fit = self.fit(new_design, lambdas)
            except SingularDesignError:
                deviances[best] = np.nan
                continue
            column = new_design.names[len(selected) + 1]
            try:
                lr = lr_test(fit, prefix_fit)
            except NonNestedError:
                # penalized fits can trade deviance for penalty
                logger.debug("%s raises the unpenalized deviance; LR statistic set to 0", column)
                lr = TestResult.from_statistic(0.0, 1, "LR")
            return key, new_design, fit, lr, wald_test(fit, column)
        return None


def default_max_splits(data: Dataset, split_sets: Dict[str, SplitSet]) -> int:
    """Cap on path length: 3 x active tree variables x mean level count, at most m_total."""
    active = [s for s in split_sets.values() if s.m > 0]
    if not active:
        return 0
    m_total = sum(s.m for s in active)
    sizes = [
        data.variable(s.variable).kind.k if data.variable(s.variable).kind.categorical else s.m + 1
        for s in active
    ]
    return int(min(m_total, math.ceil(3 * len(active) * float(np.mean(sizes)))))


def forward_step(
    data: Dataset,
    spec: FitSpec,
    selected: Sequence[SplitKey] = (),
    context: Optional[DesignContext] = None,
    lambdas: Optional[Dict[str, float]] = None,
) -> Optional[Tuple[Split, GlmFit, TestResult]]:
    """Select the next split given already selected ones.

    Every unselected candidate is fitted on all data together with the current
    splits, linear and smooth terms; the candidate with minimal deviance wins,
    ties resolved by schema variable order and then ascending threshold.

    Returns:
        The chosen split, the refitted model and the likelihood-ratio test
        against the current model, or None when every candidate is collinear.
    """
    context = context or DesignContext.fit(data)
    split_sets = {var: candidate_splits(data, var, context.orders.get(var)) for var in data.names("tree")}
    builder = _PathBuilder(data, spec, context, split_sets)
    design = builder.design(selected)
    lambdas = builder.lambdas(design) if lambdas is None else lambdas
    result = builder.step(list(selected), design, builder.fit(design, lambdas), lambdas)
    if result is None:
        return None
    (var, c), new_design, fit, lr, _ = result
    column = new_design.names[len(selected) + 1]
    return Split(var, c, len(selected) + 1, column, fit.coef()[column]), fit, lr


def fit_path(
    data: Dataset,
    spec: FitSpec,
    max_splits: Optional[int] = None,
    context: Optional[DesignContext] = None,
) -> SplitTrace:
    """Grow the split path by repeated forward steps.

    The smoothing parameters are re-selected on the current model before each
    step and the candidate search uses them.

    Args:
        data: Training data
        spec: Fitting settings
        max_splits: Path length cap; defaults to ``default_max_splits`` and is
            clamped to the number of candidates
        context: Design context; learned from ``data`` when omitted
    """
    context = context or DesignContext.fit(data)
    split_sets = {var: candidate_splits(data, var, context.orders.get(var)) for var in data.names("tree")}
    m_total = sum(s.m for s in split_sets.values())
    limit = default_max_splits(data, split_sets) if max_splits is None else min(max_splits, m_total)
    if max_splits is not None and max_splits > m_total:
        logger.debug("max_splits %d clamped to %d candidates", max_splits, m_total)
    builder = _PathBuilder(data, spec, context, split_sets)

    design = builder.design([])
    lambdas = builder.lambdas(design)
    fit = builder.fit(design, lambdas)
    steps = [TraceStep(0, None, fit, lambdas, None, None, fit.deviance)]
    keys: List[SplitKey] = []
    reason = "max_splits reached"
    for step in range(1, limit + 1):
        if step > 1 and design.smooth_blocks:
            lambdas = builder.lambdas(design)
            prefix_fit = builder.fit(design, lambdas)
        else:
            prefix_fit = fit
        result = builder.step(keys, design, prefix_fit, lambdas)
        if result is None:
            reason = "no admissible candidate"
            break
        key, design, fit, lr, wald = result
        keys.append(key)
        column = design.names[step]
        split = Split(key[0], key[1], step, column, fit.coef()[column])
        steps.append(TraceStep(step, split, fit, lambdas, lr, wald, prefix_fit.deviance))
        logger.info(
            "step %d: %s (deviance %.6g, LR p-value %.3g)", step, column, fit.deviance, lr.p_value
        )
    if len(keys) == m_total:
        reason = "all candidates selected"
    return SplitTrace(tuple(steps), split_sets, context, m_total, reason)


def build_model(
    data: Dataset,
    spec: FitSpec,
    keys: Sequence[SplitKey],
    context: Optional[DesignContext] = None,
    trace: Optional[SplitTrace] = None,
    rule: str = "",
) -> TreeStructuredModel:
    """Fit the model with exactly the given splits on all data."""
    context = context or (trace.context if trace is not None else DesignContext.fit(data))
    builder = _PathBuilder(data, spec, context, {})
    design = builder.design(keys)
    lambdas = builder.lambdas(design)
    fit = builder.fit(design, lambdas)
    coef = fit.coef()
    splits = tuple(
        Split(var, c, i + 1, design.names[i + 1], coef[design.names[i + 1]])
        for i, (var, c) in enumerate(design.splits)
    )
    clusters = {
        var: _partition(data.variable(var), [s for s in splits if s.variable == var], context)
        for var in data.names("tree")
    }
    first_linear = 1 + len(splits)
    linear = {name: coef[name] for name in design.names[first_linear : design.fixed_columns]}
    smooth = {
        var: SmoothTermFit(
            var, context.bases[var], fit.coefficients[cols], lambdas[var], float(np.sum(fit.edf_columns[cols]))
        )
        for var, (cols, _) in design.smooth_blocks.items()
    }
    return TreeStructuredModel(
        data.response_name, data.variables, spec.family, fit, splits, clusters, linear, smooth,
        lambdas, context, trace, rule,
    )


def _prefix_deviance(trace: SplitTrace, length: int, holdout: Dataset) -> float:
    step = trace.steps[min(length, trace.n_splits)]
    design = build_design(holdout, trace.keys(step.step), trace.context)
    return predictive_deviance(step.fit, design.matrix, holdout.response)


def cv_split_count(
    trace: SplitTrace, rule: StopRule, data: Dataset, spec: FitSpec, seed: int
) -> Tuple[int, np.ndarray]:
    """Split count minimizing the mean k-fold predictive deviance.

    A path is grown on every training fold to the length of ``trace``; prefix
    models are scored on the held-out fold. Folds whose path ends early carry
    their last model forward.

    Returns:
        The chosen split count and the mean predictive deviance per length
    """
    folds = kfold_indices(data.n, rule.folds, np.random.default_rng(seed))
    length = trace.n_splits

    def fold_losses(i: int) -> np.ndarray:
        train_rows = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != i]))
        train, holdout = data.take(train_rows), data.take(folds[i])
        fold_trace = fit_path(train, spec, max_splits=length)
        return np.array([_prefix_deviance(fold_trace, size, holdout) for size in range(length + 1)])

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as executor:
            losses = list(executor.map(fold_losses, range(len(folds))))
    else:
        losses = [fold_losses(i) for i in range(len(folds))]
    mean = np.sum(losses, axis=0) / len(folds)
    return int(np.argmin(mean)), mean


def bonferroni_split_count(p_values: Sequence[float], m_total: int, alpha: float) -> int:
    """Longest prefix in which every step l has ``p_l <= alpha / (m_total - (l - 1))``."""
    chosen = 0
    for step, p in enumerate(p_values, start=1):
        if p > alpha / (m_total - (step - 1)):
            break
        chosen = step
    return chosen


def apply_stop_rule(
    trace: SplitTrace,
    rule: StopRule,
    data: Dataset,
    spec: FitSpec,
    seed: Optional[int] = None,
) -> Tuple[int, TreeStructuredModel]:
    """Choose the number of splits and refit the model with them.

    The p-value rule keeps the longest prefix in which every step l satisfies
    ``p_l <= alpha / (m_total - (l - 1))``; AIC and BIC take the global minimum
    along the path; cross-validation the minimum mean predictive deviance.

    Raises:
        ConfigError: When a cross-validation rule gets no seed
    """
    if rule.kind == "pvalue":
        chosen = bonferroni_split_count(trace.p_values(rule.test), trace.m_total, rule.alpha)
    elif rule.kind in ("aic", "bic"):
        criteria = [information_criterion(step.fit, rule.kind) for step in trace.steps]
        chosen = int(np.argmin(criteria))
    else:
        if seed is None:
            raise ConfigError("the cross-validation stop rule needs a seed")
        chosen, _ = cv_split_count(trace, rule, data, spec, seed)
    logger.info("%s keeps %d of %d splits", rule.label, chosen, trace.n_splits)
    return chosen, build_model(data, spec, trace.keys(chosen), trace.context, trace, rule.label)


def fit_tree_model(
    data: Dataset,
    spec: FitSpec,
    rule: StopRule,
    max_splits: Optional[int] = None,
    seed: Optional[int] = None,
) -> TreeStructuredModel:
    """Grow a path, apply the stop rule and return the final model."""
    trace = fit_path(data, spec, max_splits)
    _, model = apply_stop_rule(trace, rule, data, spec, seed)
    return model


def extract_partitions(model: TreeStructuredModel, var: str) -> ClusterSet:
    """Cluster partition of one tree variable in a fitted model."""
    return model.clusters[var]


def coefficient_paths(trace: SplitTrace) -> pd.DataFrame:
    """Long table of every coefficient at every step of a path.

    Parameters not yet in the model at a step have value 0.
    """
    parameters: List[str] = []
    for step in trace.steps:
        for name in step.fit.names:
            if name not in parameters:
                parameters.append(name)
    rows = []
    for step in trace.steps:
        coef = step.fit.coef()
        rows.extend((step.step, name, coef.get(name, 0.0)) for name in parameters)
    return pd.DataFrame(rows, columns=["step", "parameter", "value"])
