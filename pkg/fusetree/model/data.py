"""Typed datasets, candidate splits and design matrices.

This module ingests delimited text under a column schema, enumerates the
candidate split points of tree-role variables, orders nominal levels by mean
outcome and assembles design matrices for any list of selected splits.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from fusetree import constants
from fusetree.errors import DesignError, IngestError, SchemaError
from fusetree.model.glm import Penalty, get_family
from fusetree.model.models import ColumnSpec, Schema
from fusetree.model.smooth import SplineBasis, build_spline_basis

logger = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null", "none"}

SplitKey = Tuple[str, float]


@dataclass(frozen=True)
class VariableKind:
    """Scale level of a variable; ``k`` is the level count of categorical kinds."""

    name: str
    k: Optional[int] = None

    def __post_init__(self):
        if self.name in ("nominal", "ordinal") and (self.k is None or self.k < 2):
            raise SchemaError(f"{self.name} variables need at least 2 levels")

    @property
    def categorical(self) -> bool:
        return self.name in ("nominal", "ordinal")

    def __str__(self) -> str:
        return f"{self.name}({self.k})" if self.categorical else self.name


@dataclass(frozen=True)
class Variable:
    """Predictor metadata.

    Attributes:
        name: Column name
        kind: Scale level
        role: ``tree``, ``linear`` or ``smooth``
        labels: Level labels for categorical kinds, code j has label ``labels[j-1]``
        basis_dim: Basis dimension for smooth terms
    """

    name: str
    kind: VariableKind
    role: str
    labels: Tuple[str, ...] = ()
    basis_dim: int = constants.DEFAULT_BASIS_DIM


@dataclass(frozen=True)
class Dataset:
    """Immutable typed data set.

    Categorical values are integer codes 1..k, binary values 0/1 and metric
    values floats. Arrays are read-only.
    """

    response_name: str
    response: np.ndarray
    variables: Tuple[Variable, ...]
    values: Mapping[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        n = self.response.shape[0]
        for var in self.variables:
            if self.values[var.name].shape[0] != n:
                raise IngestError("column length differs from response length", column=var.name)
        self.response.flags.writeable = False
        for array in self.values.values():
            array.flags.writeable = False

    @property
    def n(self) -> int:
        return int(self.response.shape[0])

    def variable(self, name: str) -> Variable:
        for var in self.variables:
            if var.name == name:
                return var
        raise DesignError(f"no variable named '{name}'")

    def names(self, role: str) -> List[str]:
        """Variable names with the given role, in schema order."""
        return [var.name for var in self.variables if var.role == role]

    def take(self, rows: np.ndarray) -> "Dataset":
        """Row subset (rows may repeat). Levels may be unobserved in the subset."""
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            self.response_name,
            self.response[rows].copy(),
            self.variables,
            {name: array[rows].copy() for name, array in self.values.items()},
        )

    def subset(self, mask: np.ndarray) -> "Dataset":
        """Rows where ``mask`` is true, in their original order."""
        return self.take(np.flatnonzero(np.asarray(mask, dtype=bool)))

    def observed_levels(self, name: str) -> np.ndarray:
        """Boolean mask over codes 1..k of levels present in the data."""
        var = self.variable(name)
        counts = np.bincount(self.values[name], minlength=var.kind.k + 1)[1:]
        return counts > 0

    def schema(self) -> Schema:
        """Schema that re-ingests ``to_frame()`` into an equal Dataset."""
        columns = {}
        for var in self.variables:
            spec = {"kind": var.kind.name, "role": var.role, "basis_dim": var.basis_dim}
            if var.kind.categorical:
                spec["levels"] = list(var.labels)
            columns[var.name] = ColumnSpec(**spec)
        return Schema(response=self.response_name, columns=columns)

    def to_frame(self) -> pd.DataFrame:
        """Data as labelled columns, response first."""
        frame = {self.response_name: self.response}
        for var in self.variables:
            values = self.values[var.name]
            if var.kind.categorical:
                frame[var.name] = np.asarray(var.labels, dtype=object)[values - 1]
            elif var.kind.name == "binary":
                frame[var.name] = values.astype(int)
            else:
                frame[var.name] = values
        return pd.DataFrame(frame)


def _canonical(value: str) -> str:
    """Normalize a cell so that ``2``, ``2.0`` and `` 2 `` compare equal."""
    text = value.strip()
    try:
        number = float(text)
    except ValueError:
        return text
    if np.isfinite(number) and number == int(number):
        return str(int(number))
    return repr(number)


def _parse_float(raw: pd.Series, column: str) -> np.ndarray:
    parsed = pd.to_numeric(raw.str.strip(), errors="coerce")
    bad = np.flatnonzero(parsed.isna().to_numpy())
    if bad.size:
        raise IngestError(f"non-numeric value '{raw.iloc[bad[0]]}'", row=int(bad[0]) + 1, column=column)
    return parsed.to_numpy(dtype=float)


def _ingest_column(name: str, spec: ColumnSpec, raw: pd.Series) -> Tuple[Variable, np.ndarray]:
    if spec.kind == "metric":
        return Variable(name, VariableKind("metric"), spec.role, basis_dim=spec.basis_dim), _parse_float(raw, name)
    if spec.kind == "binary":
        values = _parse_float(raw, name)
        bad = np.flatnonzero(~np.isin(values, (0.0, 1.0)))
        if bad.size:
            raise IngestError(f"binary value '{raw.iloc[bad[0]]}' is not 0/1", row=int(bad[0]) + 1, column=name)
        return Variable(name, VariableKind("binary"), spec.role), values

    cells = [_canonical(v) for v in raw]
    if spec.levels is not None:
        labels = list(spec.levels)
    elif spec.n_levels is not None:
        labels = [str(j) for j in range(1, spec.n_levels + 1)]
    else:
        labels = list(dict.fromkeys(cells))
        if len(labels) < 2:
            raise SchemaError(f"nominal column '{name}' has fewer than 2 levels")
    code_of = {_canonical(label): j for j, label in enumerate(labels, start=1)}
    codes = np.empty(len(cells), dtype=int)
    for i, cell in enumerate(cells):
        try:
            codes[i] = code_of[cell]
        except KeyError:
            raise IngestError(f"unknown level '{raw.iloc[i].strip()}'", row=i + 1, column=name) from None
    counts = np.bincount(codes, minlength=len(labels) + 1)[1:]
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise IngestError(f"empty level '{labels[empty[0]]}'", column=name)
    kind = VariableKind(spec.kind, len(labels))
    return Variable(name, kind, spec.role, tuple(labels), spec.basis_dim), codes


def ingest_dataset(table: Union[str, pd.DataFrame], schema: Schema, family: str = "gaussian") -> Dataset:
    """Read and validate a delimited table under a schema.

    Args:
        table: Path of a comma-separated UTF-8 file with a header row, or a frame
        schema: Column kinds and roles
        family: Family name used to validate the response

    Returns:
        Dataset: Validated data with categorical levels coded 1..k

    Raises:
        SchemaError: When schema columns are absent from the header
        IngestError: On missing values, unknown or empty levels, bad responses
    """
    if isinstance(table, pd.DataFrame):
        frame = table.astype(str)
    else:
        try:
            frame = pd.read_csv(table, sep=",", dtype=str, encoding="utf-8", keep_default_na=False)
        except (OSError, pd.errors.ParserError, UnicodeDecodeError) as e:
            raise IngestError(f"cannot read {table}: {e}") from e
    needed = [schema.response, *schema.columns]
    absent = [name for name in needed if name not in frame.columns]
    if absent:
        raise SchemaError(f"columns missing from data header: {', '.join(absent)}")

    for name in needed:
        missing = frame[name].str.strip().str.lower().isin(MISSING).to_numpy()
        if missing.any():
            raise IngestError("missing value", row=int(np.argmax(missing)) + 1, column=name)

    try:
        response = _parse_float(frame[schema.response], schema.response)
    except IngestError as e:
        raise IngestError(f"non-numeric response for {family} family", row=e.row, column=e.column) from None
    try:
        get_family(family).validate(response)
    except IngestError as e:
        raise IngestError(e.message, column=schema.response) from None

    variables, values = [], {}
    for name, spec in schema.columns.items():
        var, array = _ingest_column(name, spec, frame[name])
        variables.append(var)
        values[name] = array
    data = Dataset(schema.response, response, tuple(variables), values)
    logger.info(
        "ingested %d rows: tree=%s linear=%s smooth=%s",
        data.n, data.names("tree"), data.names("linear"), data.names("smooth"),
    )
    return data


def write_dataset(data: Dataset, path: str) -> None:
    """Write the data as comma-separated UTF-8 text with a header row."""
    data.to_frame().to_csv(path, index=False, encoding="utf-8", float_format="%.17g")


@dataclass(frozen=True)
class CategoryOrder:
    """Ordering of nominal levels by mean outcome.

    Attributes:
        variable: Variable name
        levels_by_rank: Level code at each rank position 1..k
        means: Mean outcome per level code (NaN for unobserved levels)
    """

    variable: str
    levels_by_rank: Tuple[int, ...]
    means: Tuple[float, ...]

    @property
    def rank_of_level(self) -> np.ndarray:
        """Array indexed by level code (index 0 unused) giving the rank."""
        ranks = np.zeros(len(self.levels_by_rank) + 1, dtype=int)
        ranks[list(self.levels_by_rank)] = np.arange(1, len(self.levels_by_rank) + 1)
        return ranks

    def ranks(self, codes: np.ndarray) -> np.ndarray:
        return self.rank_of_level[codes]


def nominal_ordering(data: Dataset, var: str) -> CategoryOrder:
    """Order the levels of a nominal variable by increasing mean response.

    For binary responses the mean is the observed proportion. Ties resolve by
    ascending level code; levels absent from the data rank last.
    """
    kind = data.variable(var).kind
    codes = data.values[var]
    counts = np.bincount(codes, minlength=kind.k + 1)[1:]
    sums = np.bincount(codes, weights=data.response, minlength=kind.k + 1)[1:]
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    level_codes = np.arange(1, kind.k + 1)
    observed = counts > 0
    rounded = np.round(means, 12)
    order = np.lexsort((level_codes, np.where(observed, rounded, 0.0), ~observed))
    return CategoryOrder(var, tuple(int(c) for c in level_codes[order]), tuple(float(m) for m in means))


@dataclass(frozen=True)
class SplitSet:
    """Candidate thresholds of one tree variable.

    Attributes:
        variable: Variable name
        candidates: Strictly increasing thresholds (ranks for nominal variables)
        order: Level ordering for nominal variables
    """

    variable: str
    candidates: np.ndarray
    order: Optional[CategoryOrder] = None

    @property
    def m(self) -> int:
        return int(self.candidates.shape[0])


def _split_values(data: Dataset, var: str, context: Optional["DesignContext"]) -> np.ndarray:
    """Values on which thresholds act: ranks for nominal, raw otherwise."""
    variable = data.variable(var)
    values = data.values[var]
    if variable.kind.name == "nominal":
        if context is None or var not in context.orders:
            raise DesignError(f"nominal variable '{var}' needs a category order")
        return context.orders[var].ranks(values)
    return values


def candidate_splits(data: Dataset, var: str, order: Optional[CategoryOrder] = None) -> SplitSet:
    """Enumerate admissible split points of a tree variable.

    Ordinal and nominal variables use thresholds 1..k-1 (nominal on ranks),
    metric and binary variables their distinct values without the maximum.
    Thresholds whose indicator is constant on the data are dropped.
    """
    variable = data.variable(var)
    if variable.role != "tree":
        raise DesignError(f"'{var}' does not have role tree")
    values = data.values[var]
    if variable.kind.name == "nominal":
        order = order or nominal_ordering(data, var)
        values = order.ranks(values)
    if variable.kind.categorical:
        thresholds = np.arange(1, variable.kind.k, dtype=float)
    else:
        thresholds = np.unique(values)[:-1].astype(float)
    above = (values[:, None] > thresholds[None, :]).sum(axis=0)
    keep = (above > 0) & (above < data.n)
    return SplitSet(var, thresholds[keep], order if variable.kind.name == "nominal" else None)


@dataclass(frozen=True)
class DesignContext:
    """What a design needs besides the rows: nominal orders and spline bases.

    Learned on training data and reused to build designs for new rows.
    """

    orders: Dict[str, CategoryOrder]
    bases: Dict[str, SplineBasis]
    observed: Dict[str, Tuple[bool, ...]]

    @classmethod
    def fit(cls, data: Dataset) -> "DesignContext":
        orders = {
            var.name: nominal_ordering(data, var.name)
            for var in data.variables
            if var.role == "tree" and var.kind.name == "nominal"
        }
        bases = {
            var.name: build_spline_basis(data.values[var.name], var.basis_dim, var.name)
            for var in data.variables
            if var.role == "smooth"
        }
        observed = {
            var.name: tuple(bool(b) for b in data.observed_levels(var.name))
            for var in data.variables
            if var.role == "tree" and var.kind.categorical
        }
        return cls(orders, bases, observed)


def split_name(var: Variable, threshold: float) -> str:
    if var.kind.name == "nominal":
        return f"{var.name}>rank{threshold:g}"
    return f"{var.name}>{threshold:g}"


@dataclass(frozen=True)
class DesignMatrix:
    """Design matrix with column bookkeeping.

    Attributes:
        matrix: n x p design
        names: Column names
        splits: Selected splits in column order
        smooth_blocks: Column slice and penalty of each smooth term
    """

    matrix: np.ndarray
    names: Tuple[str, ...]
    splits: Tuple[SplitKey, ...]
    smooth_blocks: Dict[str, Tuple[slice, np.ndarray]]

    def penalty(self, lambdas: Mapping[str, float]) -> Optional[Penalty]:
        if not self.smooth_blocks:
            return None
        return Penalty(tuple((cols, S, lambdas[name]) for name, (cols, S) in self.smooth_blocks.items()))

    @property
    def fixed_columns(self) -> int:
        """Number of leading unpenalized columns."""
        if not self.smooth_blocks:
            return self.matrix.shape[1]
        return min(cols.start for cols, _ in self.smooth_blocks.values())


def split_indicator(data: Dataset, var: str, threshold: float, context: Optional[DesignContext]) -> np.ndarray:
    return (_split_values(data, var, context) > threshold).astype(float)


def linear_columns(data: Dataset) -> Tuple[List[np.ndarray], List[str]]:
    """Columns of linear-role variables; categorical ones as dummies against level 1."""
    columns, names = [], []
    for var in data.variables:
        if var.role != "linear":
            continue
        values = data.values[var.name]
        if var.kind.categorical:
            for code in range(2, var.kind.k + 1):
                columns.append((values == code).astype(float))
                names.append(f"{var.name}={var.labels[code - 1]}")
        else:
            columns.append(values.astype(float))
            names.append(var.name)
    return columns, names


def build_design(
    data: Dataset,
    splits: Sequence[SplitKey],
    context: Optional[DesignContext] = None,
) -> DesignMatrix:
    """Assemble the design for a list of selected splits.

    Columns are the intercept, one indicator per split in selection order, the
    linear covariates in schema order and the smooth-term bases last.

    Raises:
        DesignError: On duplicate splits or splits on non-tree variables
    """
    context = context or DesignContext.fit(data)
    keys = [(var, float(c)) for var, c in splits]
    if len(set(keys)) != len(keys):
        raise DesignError("duplicate (variable, threshold) pair in split list")

    columns = [np.ones(data.n)]
    names = [constants.INTERCEPT]
    for var, c in keys:
        variable = data.variable(var)
        if variable.role != "tree":
            raise DesignError(f"split on '{var}', which does not have role tree")
        columns.append(split_indicator(data, var, c, context))
        names.append(split_name(variable, c))
    lin, lin_names = linear_columns(data)
    columns.extend(lin)
    names.extend(lin_names)

    blocks = {}
    matrix_parts = [np.column_stack(columns)]
    p = len(columns)
    for var in data.variables:
        if var.role != "smooth":
            continue
        basis = context.bases[var.name]
        matrix_parts.append(basis.matrix(data.values[var.name]))
        blocks[var.name] = (slice(p, p + basis.n_columns), basis.penalty)
        names.extend(basis.column_names)
        p += basis.n_columns
    return DesignMatrix(np.hstack(matrix_parts), tuple(names), tuple(keys), blocks)
