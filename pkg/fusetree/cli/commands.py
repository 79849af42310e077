"""CLI command definitions for fusetree.

This module defines the click group and its commands. Every command is
fully determined by its flags and ``--seed`` and writes its artifacts into
the ``--out`` directory together with ``run_config.json``.

Commands:
    fit: Fit a tree-structured model and write model, partitions and paths
    bootstrap: Bootstrap intervals, similarity matrices and cluster stability
    simulate: Compare stopping rules on simulated data
    cv-compare: Repeated k-fold predictive deviance against the plain GLM/GAM
"""

import functools
import sys
from typing import Callable, List, Optional, Tuple

import click
import numpy as np
import pandas as pd
from dotenv import load_dotenv

from fusetree import __version__
from fusetree.cli.artifacts import ArtifactWriter, partitions_frame
from fusetree.config import Settings, load_settings
from fusetree.errors import ConfigError, FusetreeError, InsufficientReplicatesError
from fusetree.log import configure_logging
from fusetree.model import bootstrap as boot
from fusetree.model.data import Dataset, ingest_dataset
from fusetree.model.glm import repeated_cv_deviance
from fusetree.model.models import STUDY_RULES, RunConfig, Schema, SimConfig, StopRule
from fusetree.model.simulation import run_study
from fusetree.model.smooth import smooth_grid
from fusetree.model.tree import FitSpec, apply_stop_rule, build_model, coefficient_paths, fit_path, fit_tree_model

# Load environment variables
load_dotenv()


def reports_errors(command: Callable) -> Callable:
    """Turn a FusetreeError into one ``error: <code>: <message>`` line and its exit status."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except FusetreeError as e:
            click.echo(e.one_line(), err=True)
            sys.exit(e.exit_code)

    return wrapper


def data_options(command: Callable) -> Callable:
    """Options shared by the commands that read a data file."""
    options = [
        click.option("--data", "data_path", type=click.Path(dir_okay=False), required=True,
                     help="Comma-separated data file with a header row"),
        click.option("--schema", "schema_path", type=click.Path(dir_okay=False), required=True,
                     help="JSON schema giving kind and role of each column"),
        click.option("--family", type=click.Choice(["gaussian", "binomial"]), default="gaussian",
                     show_default=True, help="Response family"),
        click.option("--stop", default="pvalue:0.05", show_default=True,
                     help="Stop rule: pvalue:<alpha>, aic, bic or cv:<k>"),
        click.option("--max-splits", type=click.IntRange(min=0), default=None,
                     help="Cap on the split path length"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def run_options(command: Callable) -> Callable:
    command = click.option("--out", type=click.Path(file_okay=False), required=True,
                           help="Output directory")(command)
    command = click.option("--seed", type=click.IntRange(min=0), required=True,
                           help="Seed of every random choice in the run")(command)
    return command


def make_config(**values) -> RunConfig:
    try:
        return RunConfig(**values)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def load_data(config: RunConfig) -> Dataset:
    schema = Schema.from_file(config.schema_path)
    return ingest_dataset(config.data, schema, config.family)


@click.group()
@click.version_option(version=__version__, prog_name="fusetree")
@click.option("--verbose", is_flag=True, help="Log every step at DEBUG level")
@click.option("--workers", type=click.IntRange(min=1), default=None,
              help="Threads for candidate fits, folds and replicates (overrides FUSETREE_WORKERS)")
@click.pass_context
@reports_errors
def cli_group(ctx: click.Context, verbose: bool, workers: Optional[int]) -> None:
    """fusetree - tree-structured clustering of categorical predictors.

    Fits generalized linear and additive models in which the levels of
    ordinal and nominal predictors are fused into clusters by forward
    selection of splits.
    """
    settings = load_settings()
    if workers is not None:
        settings = settings.model_copy(update={"workers": workers})
    configure_logging(settings.log_level, verbose)
    ctx.obj = settings


@cli_group.command()
@data_options
@run_options
@click.pass_obj
@reports_errors
def fit(settings: Settings, data_path, schema_path, family, stop, max_splits, seed, out) -> None:
    """Fit a tree-structured model.

    Writes model.json, partitions.csv, coefficient_paths.csv and one
    smooth_<var>.csv grid per smooth term.
    """
    config = make_config(command="fit", data=data_path, schema_path=schema_path, family=family,
                         stop=stop, max_splits=max_splits, seed=seed, out=out)
    data = load_data(config)
    spec = FitSpec.create(family, settings)
    trace = fit_path(data, spec, max_splits)
    _, model = apply_stop_rule(trace, config.stop_rule, data, spec, seed=seed)

    writer = ArtifactWriter(out, config)
    writer.json("model.json", model.to_record())
    writer.table("partitions.csv", partitions_frame(model))
    writer.table("coefficient_paths.csv", coefficient_paths(trace))
    for var, term in model.smooth.items():
        writer.table(f"smooth_{var}.csv", smooth_grid(term))
    writer.run_config()
    click.echo(click.style(f"✓ {model.n_splits} splits kept by {config.stop_rule.label}; wrote {out}", fg="green"))


@cli_group.command()
@data_options
@click.option("--bootstrap", "replicates", type=int, required=True, help="Number of bootstrap replicates B")
@click.option("--level", type=float, default=0.95, show_default=True, help="Confidence level of the intervals")
@click.option("--dump-replicates", is_flag=True, help="Also write every replicate's level effects")
@run_options
@click.pass_obj
@reports_errors
def bootstrap(settings: Settings, data_path, schema_path, family, stop, max_splits, replicates, level,
              dump_replicates, seed, out) -> None:
    """Bootstrap the fitted model.

    Writes intervals for level effects and linear terms, similarity matrices,
    cluster stabilities, variable relevance and a failure summary.
    """
    config = make_config(command="bootstrap", data=data_path, schema_path=schema_path, family=family,
                         stop=stop, max_splits=max_splits, bootstrap=replicates, level=level, seed=seed,
                         out=out, dump_replicates=dump_replicates)
    data = load_data(config)
    spec = FitSpec.create(family, settings)
    rule = config.stop_rule
    original = fit_tree_model(data, spec, rule, max_splits, seed=seed)
    result = boot.run_bootstrap(data, spec, rule, replicates, seed, max_splits)
    if len(result.models) < 2:
        raise InsufficientReplicatesError(
            f"only {len(result.models)} of {result.B} replicates succeeded"
        )

    effect_tables, stability_tables, dumps = [], [], []
    similarity = {}
    categorical = [var.name for var in data.variables if var.role == "tree" and var.kind.categorical]
    for var in categorical:
        aligned = boot.align_effects(result, original, var)
        table = boot.effect_intervals(aligned, level)
        table.insert(2, "estimate", original.level_effects(var))
        effect_tables.append(table)
        matrix, stability = boot.similarity_and_stability(result, original, var)
        similarity[var] = matrix
        stability_tables.append(stability)
        if dump_replicates:
            dumps.append(boot.replicate_effects(aligned))

    writer = ArtifactWriter(out, config)
    writer.json("model.json", original.to_record())
    if effect_tables:
        writer.table("effect_intervals.csv", pd.concat(effect_tables, ignore_index=True))
        writer.table("stability.csv", pd.concat(stability_tables, ignore_index=True))
    writer.table("linear_intervals.csv", boot.linear_intervals(result, original, level))
    writer.table("relevance.csv", boot.variable_relevance(result, data.names("tree")))
    for var, matrix in similarity.items():
        frame = matrix.to_frame()
        frame.index.name = "level"
        writer.table(f"similarity_{var}.csv", frame.reset_index())
    if dumps:
        writer.table("replicate_effects.csv", pd.concat(dumps, ignore_index=True))
    writer.json(
        "bootstrap.json",
        {
            **boot.summarize(result),
            "level": level,
            "similarity": {var: {"labels": list(m.labels), "matrix": m.matrix} for var, m in similarity.items()},
            "errors": [{"replicate": rep.index, "error": rep.error} for rep in result.replicates if not rep.ok],
        },
    )
    writer.run_config()
    click.echo(click.style(
        f"✓ {result.B - result.n_failures} of {result.B} replicates succeeded; wrote {out}", fg="green"
    ))


@cli_group.command()
@click.option("--replicates", type=click.IntRange(min=1), default=100, show_default=True,
              help="Number of simulated data sets")
@click.option("--n", "n_obs", type=click.IntRange(min=20), default=2000, show_default=True,
              help="Observations per data set")
@click.option("--rule", "rules", multiple=True, help="Stop rule to compare (repeatable); default: all six")
@click.option("--max-splits", type=click.IntRange(min=0), default=None, help="Cap on the split path length")
@run_options
@click.pass_obj
@reports_errors
def simulate(settings: Settings, replicates, n_obs, rules, max_splits, seed, out) -> None:
    """Compare stopping rules on simulated data.

    Writes study.json, per-replicate metrics, quartile summaries and
    split-count histograms.
    """
    rule_texts: List[str] = list(rules) or list(STUDY_RULES)
    config = make_config(command="simulate", replicates=replicates, n=n_obs, rules=rule_texts,
                         max_splits=max_splits, seed=seed, out=out)
    sim = SimConfig(n=n_obs, replicates=replicates, seed=seed)
    report = run_study(sim, [StopRule.parse(text) for text in rule_texts],
                       FitSpec.create("gaussian", settings), max_splits)

    writer = ArtifactWriter(out, config)
    writer.json("study.json", report.to_record())
    writer.table("metrics.csv", report.metrics)
    writer.table("summary.csv", report.summary())
    writer.table("histograms.csv", report.histograms())
    writer.run_config()
    click.echo(click.style(f"✓ {replicates} replicates x {len(rule_texts)} rules; wrote {out}", fg="green"))


@cli_group.command("cv-compare")
@data_options
@click.option("--folds", type=int, default=5, show_default=True, help="Number of folds k (2 to 20)")
@click.option("--repetitions", type=click.IntRange(min=1), default=100, show_default=True,
              help="Independent fold assignments")
@run_options
@click.pass_obj
@reports_errors
def cv_compare(settings: Settings, data_path, schema_path, family, stop, max_splits, folds, repetitions,
               seed, out) -> None:
    """Compare predictive deviance of the tree-structured model and the plain GLM/GAM.

    Both arms see identical fold assignments; the baseline is the same model
    without any split.
    """
    config = make_config(command="cv-compare", data=data_path, schema_path=schema_path, family=family,
                         stop=stop, max_splits=max_splits, folds=folds, repetitions=repetitions,
                         seed=seed, out=out)
    data = load_data(config)
    spec = FitSpec.create(family, settings)
    rule = config.stop_rule
    tree, baseline = compare_arms(data, spec, rule, max_splits, folds, repetitions, seed)
    table = pd.DataFrame({"repetition": np.arange(1, repetitions + 1), "tree": tree, "baseline": baseline})

    writer = ArtifactWriter(out, config)
    writer.table("cv_compare.csv", table)
    writer.json(
        "cv_compare.json",
        {
            "folds": folds,
            "repetitions": repetitions,
            "rule": rule.label,
            "arms": {
                name: {"mean": float(np.mean(values)), "median": float(np.median(values)),
                       "sd": float(np.std(values, ddof=1)) if repetitions > 1 else 0.0}
                for name, values in (("tree", tree), ("baseline", baseline))
            },
        },
    )
    writer.run_config()
    click.echo(click.style(
        f"✓ mean predictive deviance: tree {np.mean(tree):.6g}, baseline {np.mean(baseline):.6g}", fg="green"
    ))


def compare_arms(
    data: Dataset,
    spec: FitSpec,
    rule: StopRule,
    max_splits: Optional[int],
    folds: int,
    repetitions: int,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Repeated k-fold predictive deviance of both arms on shared folds."""
    tree = repeated_cv_deviance(
        data, lambda train: fit_tree_model(train, spec, rule, max_splits, seed=seed),
        folds, repetitions, seed, spec.workers,
    )
    baseline = repeated_cv_deviance(
        data, lambda train: build_model(train, spec, []), folds, repetitions, seed, spec.workers,
    )
    return tree, baseline
