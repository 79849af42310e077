"""Simulation study comparing stopping rules.

Data sets are generated from known level effects of ordinal and nominal
predictors plus correlated normal covariates. Each replicate grows one split
path, applies every stopping rule to it and scores the resulting models
against the truth.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from fusetree.errors import ConfigError, FusetreeError
from fusetree.model.data import Dataset, Variable, VariableKind
from fusetree.model.glm import get_family
from fusetree.model.models import STUDY_RULES, SimConfig, StopRule
from fusetree.model.tree import FitSpec, TreeStructuredModel, apply_stop_rule, fit_path

logger = logging.getLogger(__name__)

RESPONSE = "y"
METRICS = (
    "mse_ordinal",
    "mse_nominal",
    "mse_beta",
    "fpr",
    "fnr",
    "fpr_ordinal",
    "fnr_ordinal",
    "fpr_nominal",
    "fnr_nominal",
    "splits_ordinal",
    "splits_nominal",
    "splits_total",
)

Seed = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class SimTruth:
    """True effects behind a generated data set.

    Attributes:
        effects: Effect of every level code 1..k per tree variable, level 1 is 0
        kinds: ``ordinal`` or ``nominal`` per tree variable
        beta: True linear coefficients of x1..xp
    """

    effects: Dict[str, np.ndarray]
    kinds: Dict[str, str]
    beta: np.ndarray

    @property
    def covariates(self) -> List[str]:
        return [f"x{j}" for j in range(1, self.beta.shape[0] + 1)]

    def order(self, var: str) -> np.ndarray:
        """Zero-based level positions in the order adjacent differences are taken.

        Natural order for ordinal variables, sorted by true effect for nominal ones.
        """
        effects = self.effects[var]
        if self.kinds[var] == "ordinal":
            return np.arange(effects.shape[0])
        return np.argsort(effects, kind="stable")

    def nonzero_differences(self, var: str) -> np.ndarray:
        return np.abs(np.diff(self.effects[var][self.order(var)])) > 1e-12

    def true_splits(self, var: str) -> int:
        return int(np.sum(self.nonzero_differences(var)))

    def n_clusters(self, var: str) -> int:
        return self.true_splits(var) + 1


@dataclass(frozen=True)
class SimMetrics:
    """Accuracy of one fitted model against the truth.

    MSEs of level effects are relative to level 1 and averaged over the
    predictors of each type. Rates pool all adjacent differences; the per-type
    rates average the predictors for which a rate is defined.
    """

    mse_ordinal: float
    mse_nominal: float
    mse_beta: float
    fpr: float
    fnr: float
    fpr_ordinal: float
    fnr_ordinal: float
    fpr_nominal: float
    fnr_nominal: float
    splits_ordinal: int
    splits_nominal: int
    splits_total: int

    def to_record(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in METRICS}


def truth_from_config(cfg: SimConfig) -> SimTruth:
    """Truth record of a configuration; level 1 gets effect 0 ahead of each vector."""
    effects, kinds = {}, {}
    for prefix, kind, vectors in (("o", "ordinal", cfg.ordinal_truth), ("n", "nominal", cfg.nominal_truth)):
        for i, vector in enumerate(vectors, start=1):
            effects[f"{prefix}{i}"] = np.concatenate([[0.0], np.asarray(vector, dtype=float)])
            kinds[f"{prefix}{i}"] = kind
    return SimTruth(effects, kinds, np.asarray(cfg.beta, dtype=float))


def covariate_covariance(p: int, correlation: float) -> np.ndarray:
    """Unit variances with a common covariance."""
    return (1.0 - correlation) * np.eye(p) + correlation * np.ones((p, p))


def generate_dataset(cfg: SimConfig, seed: Seed) -> Tuple[Dataset, SimTruth]:
    """Draw one data set of ``cfg.n`` rows.

    Level codes are uniform over 1..k. The response is the sum of the true
    level effects, the linear covariate terms and normal noise, with intercept 0.
    """
    rng = np.random.default_rng(seed)
    truth = truth_from_config(cfg)
    n = cfg.n
    variables: List[Variable] = []
    values: Dict[str, np.ndarray] = {}
    eta = np.zeros(n)
    for name, effects in truth.effects.items():
        k = effects.shape[0]
        codes = rng.integers(1, k + 1, size=n)
        labels = tuple(str(j) for j in range(1, k + 1))
        variables.append(Variable(name, VariableKind(truth.kinds[name], k), "tree", labels))
        values[name] = codes
        eta += effects[codes - 1]
    p = truth.beta.shape[0]
    X = rng.multivariate_normal(np.zeros(p), covariate_covariance(p, cfg.covariance), size=n)
    for j, name in enumerate(truth.covariates):
        variables.append(Variable(name, VariableKind("metric"), "linear"))
        values[name] = X[:, j]
    y = eta + X @ truth.beta + rng.normal(0.0, cfg.noise_sd, size=n)
    return Dataset(RESPONSE, y, tuple(variables), values), truth


def stream_seed(seed: Seed) -> int:
    """Integer seed derived from a seed or seed sequence."""
    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return int(sequence.generate_state(1)[0])


def _rate(flags: np.ndarray) -> float:
    return float(np.mean(flags)) if flags.size else float("nan")


def _mean(values: Sequence[float]) -> float:
    finite = [v for v in values if not np.isnan(v)]
    return float(np.mean(finite)) if finite else float("nan")


def evaluate_fit(model: TreeStructuredModel, truth: SimTruth) -> SimMetrics:
    """Score a fitted model against the truth it was generated from.

    A false positive is a truly zero adjacent difference whose two levels lie
    in different cells; a false negative a truly nonzero difference whose
    levels share a cell.
    """
    mse = {"ordinal": [], "nominal": []}
    rates = {"ordinal": ([], []), "nominal": ([], [])}
    pooled_fp, pooled_fn = [], []
    for var, effects in truth.effects.items():
        kind = truth.kinds[var]
        k = effects.shape[0]
        cluster = model.clusters[var]
        codes = np.arange(1, k + 1)
        estimate = cluster.effect(codes) - cluster.effect(np.array([1]))[0]
        mse[kind].append(float(np.mean((estimate[1:] - effects[1:]) ** 2)))

        order = truth.order(var)
        true_nonzero = truth.nonzero_differences(var)
        estimated_nonzero = np.diff(cluster.level_cells(k)[order]) != 0
        false_positive = estimated_nonzero[~true_nonzero]
        false_negative = ~estimated_nonzero[true_nonzero]
        rates[kind][0].append(_rate(false_positive))
        rates[kind][1].append(_rate(false_negative))
        pooled_fp.append(false_positive)
        pooled_fn.append(false_negative)

    beta_hat = np.array([model.linear[name] for name in truth.covariates])
    splits = {"ordinal": 0, "nominal": 0}
    for split in model.splits:
        kind = truth.kinds.get(split.variable)
        if kind is not None:
            splits[kind] += 1
    return SimMetrics(
        mse_ordinal=_mean(mse["ordinal"]),
        mse_nominal=_mean(mse["nominal"]),
        mse_beta=float(np.mean((beta_hat - truth.beta) ** 2)),
        fpr=_rate(np.concatenate(pooled_fp)),
        fnr=_rate(np.concatenate(pooled_fn)),
        fpr_ordinal=_mean(rates["ordinal"][0]),
        fnr_ordinal=_mean(rates["ordinal"][1]),
        fpr_nominal=_mean(rates["nominal"][0]),
        fnr_nominal=_mean(rates["nominal"][1]),
        splits_ordinal=splits["ordinal"],
        splits_nominal=splits["nominal"],
        splits_total=model.n_splits,
    )


@dataclass(frozen=True)
class StudyReport:
    """Per-replicate metrics of every rule plus failed replicates.

    Attributes:
        metrics: One row per (replicate, rule)
        rules: Rule labels in request order
        failures: (replicate, seed, message) of replicates that failed
        config: Study configuration
    """

    metrics: pd.DataFrame
    rules: Tuple[str, ...]
    failures: Tuple[Tuple[int, int, str], ...]
    config: SimConfig = field(repr=False)

    def summary(self) -> pd.DataFrame:
        """Quartiles of every metric per rule."""
        rows = []
        for rule in self.rules:
            subset = self.metrics[self.metrics["rule"] == rule]
            for metric in METRICS:
                values = subset[metric].to_numpy(dtype=float)
                values = values[~np.isnan(values)]
                if values.size:
                    q25, median, q75 = np.percentile(values, [25, 50, 75])
                else:
                    q25 = median = q75 = float("nan")
                rows.append({"rule": rule, "metric": metric, "q25": q25, "median": median, "q75": q75})
        return pd.DataFrame(rows, columns=["rule", "metric", "q25", "median", "q75"])

    def histograms(self) -> pd.DataFrame:
        """Split-count frequencies per rule and predictor type."""
        rows = []
        for rule in self.rules:
            subset = self.metrics[self.metrics["rule"] == rule]
            for kind in ("ordinal", "nominal"):
                counts = subset[f"splits_{kind}"].value_counts().sort_index()
                rows.extend(
                    {"rule": rule, "type": kind, "splits": int(splits), "count": int(count)}
                    for splits, count in counts.items()
                )
        return pd.DataFrame(rows, columns=["rule", "type", "splits", "count"])

    def to_record(self) -> Dict[str, Any]:
        summary = self.summary()
        return {
            "config": self.config.model_dump(),
            "rules": list(self.rules),
            "replicates": int(self.metrics["replicate"].nunique()) if len(self.metrics) else 0,
            "failures": [{"replicate": r, "seed": s, "error": e} for r, s, e in self.failures],
            "summary": {
                rule: {
                    row.metric: {"q25": row.q25, "median": row.median, "q75": row.q75}
                    for row in summary[summary["rule"] == rule].itertuples()
                }
                for rule in self.rules
            },
            "histograms": self.histograms().to_dict(orient="records"),
        }


def run_replicate(
    cfg: SimConfig,
    rules: Sequence[StopRule],
    spec: FitSpec,
    seed: Seed,
    max_splits: Optional[int] = None,
) -> List[Dict[str, Any]]:
    """Generate one data set, grow one path and score every rule on it."""
    data, truth = generate_dataset(cfg, seed)
    trace = fit_path(data, spec, max_splits)
    cv_seed = stream_seed(seed)
    rows = []
    for rule in rules:
        _, model = apply_stop_rule(trace, rule, data, spec, seed=cv_seed)
        rows.append({"rule": rule.label, **evaluate_fit(model, truth).to_record()})
    return rows


def run_study(
    cfg: SimConfig,
    rules: Sequence[StopRule],
    spec: Optional[FitSpec] = None,
    max_splits: Optional[int] = None,
) -> StudyReport:
    """Run ``cfg.replicates`` replicates and collect the metrics of every rule.

    Replicate i uses the i-th child of ``SeedSequence(cfg.seed)``; the report
    does not depend on the completion order of threaded replicates.

    Raises:
        ConfigError: When a rule is not one of ``STUDY_RULES``
    """
    study_rules = [StopRule.parse(text).model_dump() for text in STUDY_RULES]
    foreign = [rule.label for rule in rules if rule.model_dump() not in study_rules]
    if foreign:
        raise ConfigError(f"the study compares {', '.join(STUDY_RULES)}; got {', '.join(foreign)}")
    spec = spec or FitSpec(get_family("gaussian"))
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replicates)

    def one(i: int) -> Tuple[List[Dict[str, Any]], Optional[Tuple[int, int, str]]]:
        replicate_seed = stream_seed(children[i])
        try:
            rows = run_replicate(cfg, rules, spec, children[i], max_splits)
        except (FusetreeError, np.linalg.LinAlgError) as e:
            logger.warning("replicate %d (seed %d) failed: %s", i + 1, replicate_seed, e)
            return [], (i + 1, replicate_seed, str(e))
        logger.info("replicate %d of %d done", i + 1, cfg.replicates)
        return [{"replicate": i + 1, "seed": replicate_seed, **row} for row in rows], None

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as executor:
            outcomes = list(executor.map(one, range(cfg.replicates)))
    else:
        outcomes = [one(i) for i in range(cfg.replicates)]
    rows = [row for replicate_rows, _ in outcomes for row in replicate_rows]
    failures = tuple(failure for _, failure in outcomes if failure is not None)
    metrics = pd.DataFrame(rows, columns=["replicate", "seed", "rule", *METRICS])
    return StudyReport(metrics, tuple(rule.label for rule in rules), failures, cfg)
