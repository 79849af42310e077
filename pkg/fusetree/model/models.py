"""Pydantic models for fusetree configuration and schemas.

This module contains the validated, serializable records that describe a run:
the column schema of a data file, stopping rules, the simulation design and
the configuration of one CLI invocation.
"""

import hashlib
import json
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from fusetree import constants
from fusetree.errors import ConfigError

Kind = Literal["nominal", "ordinal", "metric", "binary"]
Role = Literal["tree", "linear", "smooth"]
FamilyName = Literal["gaussian", "binomial"]


class ColumnSpec(BaseModel):
    """Schema entry for one predictor column.

    Attributes:
        kind (str): Scale level of the column
        role (str): How the column enters the predictor
        levels (Optional[List[str]]): Level labels in order; the order is the ordinal order
        n_levels (Optional[int]): Level count for integer-coded categorical columns
        basis_dim (int): Basis dimension when the column is a smooth term
    """

    kind: Kind = Field(..., description="Scale level of the column")
    role: Role = Field(..., description="How the column enters the predictor")
    levels: Optional[List[str]] = Field(
        default=None, description="Level labels in order; the order is the ordinal order"
    )
    n_levels: Optional[int] = Field(
        default=None, ge=2, description="Level count for integer-coded categorical columns"
    )
    basis_dim: int = Field(
        default=constants.DEFAULT_BASIS_DIM, ge=3, description="Basis dimension of a smooth term"
    )

    @model_validator(mode="after")
    def _check_consistency(self) -> "ColumnSpec":
        if self.role == "smooth" and self.kind != "metric":
            raise ValueError("only metric columns can have role 'smooth'")
        if self.kind in ("metric", "binary") and (self.levels or self.n_levels):
            raise ValueError(f"{self.kind} columns take no levels")
        if self.kind == "ordinal" and not self.levels and not self.n_levels:
            raise ValueError("ordinal columns need 'levels' or 'n_levels'")
        if self.levels is not None:
            if len(self.levels) < 2:
                raise ValueError("categorical columns need at least two levels")
            if len(set(self.levels)) != len(self.levels):
                raise ValueError("duplicate level labels")
        return self


class Schema(BaseModel):
    """Column schema of a delimited data file.

    Attributes:
        response (str): Name of the response column
        columns (Dict[str, ColumnSpec]): Predictor columns in schema order
    """

    response: str = Field(..., description="Name of the response column")
    columns: Dict[str, ColumnSpec] = Field(
        default_factory=dict, description="Predictor columns in schema order"
    )

    @model_validator(mode="after")
    def _check_response(self) -> "Schema":
        if self.response in self.columns:
            raise ValueError("the response column cannot also be a predictor")
        return self

    @classmethod
    def from_file(cls, path: str) -> "Schema":
        """Load and validate a JSON schema file."""
        from fusetree.errors import SchemaError

        try:
            with open(path, "r", encoding="utf-8") as f:
                payload = json.load(f)
            return cls.model_validate(payload)
        except OSError as e:
            raise SchemaError(f"cannot read schema {path}: {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise SchemaError(f"schema {path} is not valid JSON: {e.msg}") from e
        except ValueError as e:
            raise SchemaError(f"invalid schema {path}: {e}") from e


class StopRule(BaseModel):
    """Rule choosing the number of splits along a split path.

    Attributes:
        kind (str): One of pvalue, aic, bic, cv
        alpha (Optional[float]): Significance level for the p-value rule
        folds (Optional[int]): Fold count for cross-validation
        test (str): Test producing the per-step p-values
    """

    kind: Literal["pvalue", "aic", "bic", "cv"] = Field(..., description="Stopping criterion")
    alpha: Optional[float] = Field(default=None, gt=0, lt=1, description="Significance level")
    folds: Optional[int] = Field(
        default=None, ge=constants.MIN_FOLDS, le=constants.MAX_FOLDS, description="Number of cross-validation folds"
    )
    test: Literal["lr", "wald"] = Field(default="lr", description="Per-step test statistic")

    @model_validator(mode="after")
    def _check_parameters(self) -> "StopRule":
        if self.kind == "pvalue" and self.alpha is None:
            raise ValueError("the p-value rule needs alpha")
        if self.kind == "cv" and self.folds is None:
            raise ValueError("the cross-validation rule needs a fold count")
        return self

    @classmethod
    def parse(cls, text: str) -> "StopRule":
        """Parse the command-line form ``pvalue:0.05``, ``aic``, ``bic`` or ``cv:5``.

        Raises:
            ConfigError: When the text is not a valid rule
        """
        name, _, arg = text.strip().lower().partition(":")
        try:
            if name in ("pvalue", "p"):
                return cls(kind="pvalue", alpha=float(arg))
            if name in ("aic", "bic") and not arg:
                return cls(kind=name)
            if name == "cv":
                return cls(kind="cv", folds=int(arg))
        except ValueError as e:
            raise ConfigError(f"invalid stop rule '{text}': {e}") from e
        raise ConfigError(f"invalid stop rule '{text}'; use pvalue:<alpha>, aic, bic or cv:<k>")

    @property
    def label(self) -> str:
        """Short display name such as ``pvalue(0.05)``."""
        if self.kind == "pvalue":
            return f"pvalue({self.alpha:g})"
        if self.kind == "cv":
            return f"cv({self.folds})"
        return self.kind


STUDY_RULES = ("aic", "bic", "cv:5", "cv:10", "pvalue:0.05", "pvalue:0.1")


class SimConfig(BaseModel):
    """Design of the simulation study.

    Truth vectors list the effects of levels 2..k; level 1 is the reference
    with effect 0.
    """

    n: int = Field(default=2000, ge=20, description="Observations per data set")
    ordinal_truth: List[List[float]] = Field(
        default_factory=lambda: [
            [0, 1, 1, 2, 2, 3, 3, 4, 4],
            [0, 0, 0, 0, 2, 2, 2, 2, 2],
            [1, 1, 2, 2],
            [0, 0, 0, 0],
        ],
        description="Level effects of the ordinal predictors",
    )
    nominal_truth: List[List[float]] = Field(
        default_factory=lambda: [
            [0, 0.5, 0.5, -0.5, -0.5, 1.5, 1.5, -1.5, -1.5],
            [0, 0, 0, 0, -2, -2, -2, -2, -2],
            [1, 1, -1, -1],
            [0, 0, 0, 0],
        ],
        description="Level effects of the nominal predictors",
    )
    beta: List[float] = Field(
        default_factory=lambda: [-2.0, 1.0, -1.0, 3.0, 2.0], description="Linear coefficients"
    )
    covariance: float = Field(default=0.3, ge=0, lt=1, description="Covariate correlation")
    noise_sd: float = Field(default=1.0, ge=0, description="Standard deviation of the noise")
    replicates: int = Field(default=100, ge=1, description="Number of simulated data sets")
    seed: int = Field(..., ge=0, description="Study seed")

    @field_validator("ordinal_truth", "nominal_truth")
    @classmethod
    def _check_truth(cls, value: List[List[float]]) -> List[List[float]]:
        if any(len(effects) < 1 for effects in value):
            raise ValueError("every truth vector needs at least one entry")
        return value


class RunConfig(BaseModel):
    """Configuration of one CLI invocation.

    The canonical JSON form, without the output directory, is hashed into the
    ``config_hash`` stamped on every artifact.
    """

    command: Literal["fit", "bootstrap", "simulate", "cv-compare"]
    data: Optional[str] = None
    schema_path: Optional[str] = None
    family: FamilyName = "gaussian"
    stop: str = "pvalue:0.05"
    max_splits: Optional[int] = Field(default=None, ge=0)
    bootstrap: Optional[int] = Field(default=None, ge=1)
    level: float = Field(default=0.95, gt=0, lt=1)
    seed: int = Field(..., ge=0)
    out: str
    replicates: Optional[int] = Field(default=None, ge=1)
    repetitions: Optional[int] = Field(default=None, ge=1)
    folds: int = Field(default=5)
    n: Optional[int] = Field(default=None, ge=20)
    rules: List[str] = Field(default_factory=list)
    dump_replicates: bool = False

    @model_validator(mode="after")
    def _check_command(self) -> "RunConfig":
        if self.command != "simulate" and (not self.data or not self.schema_path):
            raise ValueError(f"'{self.command}' needs --data and --schema")
        if self.command == "bootstrap" and (self.bootstrap is None or self.bootstrap < 2):
            raise ValueError("bootstrap needs --bootstrap B with B >= 2")
        if not constants.MIN_FOLDS <= self.folds <= constants.MAX_FOLDS:
            raise ValueError(
                f"--folds must lie in [{constants.MIN_FOLDS}, {constants.MAX_FOLDS}]"
            )
        StopRule.parse(self.stop)
        for rule in self.rules:
            StopRule.parse(rule)
        return self

    @property
    def stop_rule(self) -> StopRule:
        return StopRule.parse(self.stop)

    def canonical(self) -> Dict:
        """Run configuration without the output location."""
        return self.model_dump(exclude={"out"})

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form."""
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()
