"""Generalized linear model engine.

Fits gaussian-identity and binomial-logit GLMs by (penalized) iteratively
reweighted least squares and provides deviances, likelihood-ratio and Wald
tests, information criteria and out-of-sample predictive deviance.
"""

import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, special, stats

from fusetree import constants
from fusetree.errors import DesignError, IngestError, NonNestedError, SingularDesignError

logger = logging.getLogger(__name__)


class Family(ABC):
    """Exponential family with its canonical link."""

    name: str
    link: str

    @abstractmethod
    def linkfun(self, mu: np.ndarray) -> np.ndarray:
        """Link g(mu)."""

    @abstractmethod
    def linkinv(self, eta: np.ndarray) -> np.ndarray:
        """Response function h(eta)."""

    @abstractmethod
    def mu_eta(self, mu: np.ndarray) -> np.ndarray:
        """Derivative d mu / d eta expressed through mu."""

    @abstractmethod
    def variance(self, mu: np.ndarray) -> np.ndarray:
        """Variance function V(mu)."""

    @abstractmethod
    def dev_resids(self, y: np.ndarray, mu: np.ndarray) -> np.ndarray:
        """Per-observation deviance contributions."""

    @abstractmethod
    def loglik(self, y: np.ndarray, mu: np.ndarray) -> float:
        """Maximized log-likelihood at mu."""

    @abstractmethod
    def initial_mu(self, y: np.ndarray) -> np.ndarray:
        """Starting values for IRLS."""

    @abstractmethod
    def validate(self, y: np.ndarray) -> None:
        """Reject responses outside the family's range."""

    @property
    def scale_parameters(self) -> int:
        """Number of estimated dispersion parameters."""
        return 0

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class Gaussian(Family):
    name = "gaussian"
    link = "identity"

    def linkfun(self, mu):
        return mu

    def linkinv(self, eta):
        return eta

    def mu_eta(self, mu):
        return np.ones_like(mu)

    def variance(self, mu):
        return np.ones_like(mu)

    def dev_resids(self, y, mu):
        return (y - mu) ** 2

    def loglik(self, y, mu):
        n = y.shape[0]
        sigma2 = max(float(np.sum((y - mu) ** 2)) / n, np.finfo(float).tiny)
        return -0.5 * n * (np.log(2 * np.pi * sigma2) + 1.0)

    def initial_mu(self, y):
        return y.astype(float)

    def validate(self, y):
        if not np.all(np.isfinite(y)):
            raise IngestError("non-numeric response for gaussian family")

    @property
    def scale_parameters(self) -> int:
        return 1


class Binomial(Family):
    """Binomial family for 0/1 responses with logit link."""

    name = "binomial"
    link = "logit"

    def linkfun(self, mu):
        return special.logit(mu)

    def linkinv(self, eta):
        return np.clip(special.expit(eta), constants.MU_CLAMP, 1.0 - constants.MU_CLAMP)

    def mu_eta(self, mu):
        return mu * (1.0 - mu)

    def variance(self, mu):
        return mu * (1.0 - mu)

    def dev_resids(self, y, mu):
        return 2.0 * (
            special.xlogy(y, y) - special.xlogy(y, mu)
            + special.xlogy(1.0 - y, 1.0 - y) - special.xlogy(1.0 - y, 1.0 - mu)
        )

    def loglik(self, y, mu):
        return float(np.sum(special.xlogy(y, mu) + special.xlogy(1.0 - y, 1.0 - mu)))

    def initial_mu(self, y):
        return (y + 0.5) / 2.0

    def validate(self, y):
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise IngestError("binomial response must be coded 0/1")


FAMILIES: Dict[str, Family] = {"gaussian": Gaussian(), "binomial": Binomial()}


def get_family(name: str) -> Family:
    """Look up a family by name (``gaussian`` or ``binomial``)."""
    try:
        return FAMILIES[name]
    except KeyError:
        raise DesignError(f"unknown family '{name}'") from None


@dataclass(frozen=True)
class Penalty:
    """Quadratic penalty made of weighted blocks.

    Attributes:
        blocks: Tuples of (column slice, block penalty matrix, smoothing parameter)
    """

    blocks: Tuple[Tuple[slice, np.ndarray, float], ...] = ()

    def matrix(self, p: int) -> np.ndarray:
        """Full p x p penalty, sum of lambda_j * S_j embedded at their columns."""
        total = np.zeros((p, p))
        for cols, block, lam in self.blocks:
            total[cols, cols] += lam * block
        return total

    def root(self, p: int) -> np.ndarray:
        """Matrix E with E.T @ E equal to the full penalty."""
        rows = [np.zeros((0, p))]
        for cols, block, lam in self.blocks:
            if lam <= 0 or not block.any():
                continue
            values, vectors = linalg.eigh(block)
            keep = values > values.max() * 1e-13
            local = (vectors[:, keep] * np.sqrt(lam * values[keep])).T
            embedded = np.zeros((local.shape[0], p))
            embedded[:, cols] = local
            rows.append(embedded)
        return np.vstack(rows)

    @property
    def lambdas(self) -> Tuple[float, ...]:
        return tuple(lam for _, _, lam in self.blocks)


@dataclass(frozen=True)
class GlmFit:
    """Result of a (penalized) GLM fit.

    Attributes:
        coefficients: Estimated coefficients in design column order
        names: Design column names
        family: Fitted family
        deviance: Residual deviance
        loglik: Maximized log-likelihood
        dispersion: Dispersion estimate (Pearson for gaussian, 1 for binomial)
        covariance: Coefficient covariance matrix
        edf_columns: Effective degrees of freedom per column
        n_iter: IRLS iterations used
        converged: Whether the deviance criterion was met
        n_obs: Number of observations
        penalty: Penalty used, if any
    """

    coefficients: np.ndarray
    names: Tuple[str, ...]
    family: Family
    deviance: float
    loglik: float
    dispersion: float
    covariance: np.ndarray
    edf_columns: np.ndarray
    n_iter: int
    converged: bool
    n_obs: int
    penalty: Optional[Penalty] = field(default=None, repr=False)

    @property
    def n_params(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def edf(self) -> float:
        return float(np.sum(self.edf_columns))

    def coef(self) -> Dict[str, float]:
        """Coefficients keyed by column name."""
        return {name: float(value) for name, value in zip(self.names, self.coefficients)}

    def to_record(self) -> Dict[str, Any]:
        """JSON-ready summary of the fit."""
        return {
            "family": self.family.name,
            "link": self.family.link,
            "coefficients": self.coef(),
            "standard_errors": {
                name: float(np.sqrt(max(self.covariance[i, i], 0.0)))
                for i, name in enumerate(self.names)
            },
            "deviance": float(self.deviance),
            "loglik": float(self.loglik),
            "dispersion": float(self.dispersion),
            "edf": self.edf,
            "n_obs": self.n_obs,
            "iterations": self.n_iter,
            "converged": self.converged,
            "lambdas": list(self.penalty.lambdas) if self.penalty is not None else [],
        }


@dataclass(frozen=True)
class TestResult:
    """Outcome of a chi-square referenced test.

    Attributes:
        statistic: Non-negative test statistic
        df: Degrees of freedom
        p_value: Upper-tail chi-square probability of the statistic
        kind: ``"LR"`` or ``"Wald"``
    """

    __test__ = False

    statistic: float
    df: int
    p_value: float
    kind: str

    @classmethod
    def from_statistic(cls, statistic: float, df: int, kind: str = "LR") -> "TestResult":
        statistic = max(float(statistic), 0.0)
        p_value = 1.0 if statistic == 0.0 or df == 0 else float(stats.chi2.sf(statistic, df))
        return cls(statistic=statistic, df=df, p_value=p_value, kind=kind)


def _dependent_columns(A: np.ndarray, names: Sequence[str]) -> List[str]:
    """Names of the columns a pivoted QR finds linearly dependent."""
    norms = np.linalg.norm(A, axis=0)
    zero = norms == 0.0
    scaled = A / np.where(zero, 1.0, norms)
    _, R, piv = linalg.qr(scaled, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > constants.RANK_TOLERANCE * (diag[0] if diag.size else 0.0)))
    dependent = set(piv[rank:].tolist()) | set(np.flatnonzero(zero).tolist())
    return [names[i] for i in sorted(dependent)]


def fit_glm(
    X: np.ndarray,
    y: np.ndarray,
    family: Family,
    penalty: Optional[Penalty] = None,
    names: Optional[Sequence[str]] = None,
    max_iter: int = constants.MAX_ITER,
    tol: float = constants.DEVIANCE_TOLERANCE,
) -> GlmFit:
    """Fit a GLM by penalized iteratively reweighted least squares.

    Each iteration solves the augmented least-squares problem
    ``[sqrt(W) X; E] b = [sqrt(W) z; 0]`` with ``E.T @ E`` the penalty, through a
    QR decomposition.

    Args:
        X: Design matrix (n x p)
        y: Response vector
        family: Exponential family
        penalty: Optional quadratic penalty on the coefficients
        names: Column names used in errors and records
        max_iter: Iteration cap
        tol: Relative deviance change defining convergence

    Returns:
        GlmFit: The fitted model; ``converged`` is False when the cap was hit

    Raises:
        DesignError: When X and y disagree in shape
        SingularDesignError: When the working design is rank deficient
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DesignError(f"design has shape {X.shape} but response has {y.shape[0]} rows")
    n, p = X.shape
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(p))
    if len(names) != p:
        raise DesignError(f"{len(names)} column names for {p} columns")
    family.validate(y)

    E = penalty.root(p) if penalty is not None else np.zeros((0, p))
    dependent = _dependent_columns(np.vstack([X, E]), names)
    if dependent:
        raise SingularDesignError(dependent)

    mu = family.initial_mu(y)
    eta = family.linkfun(mu)
    deviance = np.inf
    converged = False
    n_iter = 0
    zeros = np.zeros(E.shape[0])
    for n_iter in range(1, max_iter + 1):
        d = family.mu_eta(mu)
        z = eta + (y - mu) / d
        sw = np.sqrt(d * d / family.variance(mu))
        A = np.vstack([sw[:, None] * X, E])
        Q, R = np.linalg.qr(A)
        beta = linalg.solve_triangular(R, Q.T @ np.concatenate([sw * z, zeros]))
        eta = X @ beta
        mu = family.linkinv(eta)
        new_deviance = float(np.sum(family.dev_resids(y, mu)))
        if isinstance(family, Gaussian):
            deviance, converged = new_deviance, True
            break
        change = abs(new_deviance - deviance) / (abs(new_deviance) + 0.1)
        deviance = new_deviance
        if change < tol:
            converged = True
            break
    if not converged:
        logger.warning(
            "IRLS did not converge after %d iterations (deviance %.6g); possible separation",
            n_iter, deviance,
        )

    d = family.mu_eta(mu)
    w = d * d / family.variance(mu)
    WX = np.sqrt(w)[:, None] * X
    _, R = np.linalg.qr(np.vstack([WX, E]))
    R_inv = linalg.solve_triangular(R, np.eye(p))
    unscaled = R_inv @ R_inv.T
    edf_columns = np.sum(unscaled * (WX.T @ WX), axis=1)
    if isinstance(family, Gaussian):
        resid_df = max(n - float(np.sum(edf_columns)), 1.0)
        dispersion = float(np.sum((y - mu) ** 2)) / resid_df
    else:
        dispersion = 1.0
    return GlmFit(
        coefficients=beta,
        names=names,
        family=family,
        deviance=deviance,
        loglik=family.loglik(y, mu),
        dispersion=dispersion,
        covariance=dispersion * unscaled,
        edf_columns=edf_columns,
        n_iter=n_iter,
        converged=converged,
        n_obs=n,
        penalty=penalty,
    )


def lr_test(fit_full: GlmFit, fit_reduced: GlmFit) -> TestResult:
    """Likelihood-ratio test of a reduced model nested in a full model.

    The statistic is the deviance drop divided by the dispersion: 1 for
    binomial, the full model's Pearson estimate for gaussian.

    Raises:
        NonNestedError: When the reduced deviance is below the full deviance
            beyond tolerance or the full model has fewer columns
    """
    df = fit_full.n_params - fit_reduced.n_params
    drop = fit_reduced.deviance - fit_full.deviance
    slack = constants.DEVIANCE_TOLERANCE * max(1.0, abs(fit_full.deviance))
    if df < 0 or drop < -slack:
        raise NonNestedError(
            f"reduced deviance {fit_reduced.deviance:.6g} vs full {fit_full.deviance:.6g} "
            f"with {df} extra columns"
        )
    if df == 0:
        if abs(drop) > slack:
            raise NonNestedError("models with equal column counts differ in deviance")
        return TestResult.from_statistic(0.0, 0)
    dispersion = fit_full.dispersion if isinstance(fit_full.family, Gaussian) else 1.0
    if dispersion <= 0.0:
        # exact fit: any real deviance drop is infinitely significant
        return TestResult.from_statistic(0.0 if drop <= slack else np.inf, df, "LR")
    return TestResult.from_statistic(max(drop, 0.0) / dispersion, df, "LR")


def wald_test(fit: GlmFit, column: str) -> TestResult:
    """Wald test of a single coefficient being zero."""
    try:
        j = fit.names.index(column)
    except ValueError:
        raise DesignError(f"no column named '{column}'") from None
    variance = fit.covariance[j, j]
    statistic = fit.coefficients[j] ** 2 / variance if variance > 0 else np.inf
    return TestResult.from_statistic(statistic, 1, "Wald")


def information_criterion(fit: GlmFit, kind: str) -> float:
    """AIC or BIC from the log-likelihood and effective degrees of freedom."""
    params = fit.edf + fit.family.scale_parameters
    weight = 2.0 if kind == "aic" else np.log(fit.n_obs)
    return -2.0 * fit.loglik + weight * params


def predict_response(fit: GlmFit, X_new: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Linear predictor and mean for new design rows.

    Raises:
        DesignError: When X_new does not have the fit's column count
    """
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim != 2 or X_new.shape[1] != fit.n_params:
        raise DesignError(
            f"new design has {X_new.shape[-1]} columns, the fit has {fit.n_params}"
        )
    eta = X_new @ fit.coefficients
    return eta, fit.family.linkinv(eta)


def predictive_deviance(fit: GlmFit, X_holdout: np.ndarray, y_holdout: np.ndarray) -> float:
    """Sum of the family deviance contributions of held-out responses."""
    _, mu = predict_response(fit, X_holdout)
    return float(np.sum(fit.family.dev_resids(np.asarray(y_holdout, dtype=float), mu)))


def kfold_indices(n: int, k: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Random partition of ``range(n)`` into k folds of near-equal size."""
    order = rng.permutation(n)
    return [np.sort(fold) for fold in np.array_split(order, k)]


def repeated_cv_deviance(
    dataset: Any,
    fitter: Callable[[Any], Any],
    k: int,
    repetitions: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Repeated k-fold predictive deviance of a fitting pipeline.

    Args:
        dataset: Data supporting ``n`` and ``take(rows)``
        fitter: Callable fitting a model on a training subset; the model must
            provide ``predictive_deviance(dataset)``
        k: Number of folds
        repetitions: Number of independent fold assignments
        seed: Seed of the fold assignments; equal seeds give equal folds
        workers: Thread pool size over repetitions

    Returns:
        np.ndarray: Summed holdout deviance per repetition
    """
    children = np.random.SeedSequence(seed).spawn(repetitions)

    def one_repetition(child: np.random.SeedSequence) -> float:
        folds = kfold_indices(dataset.n, k, np.random.default_rng(child))
        total = 0.0
        for i, test in enumerate(folds):
            train = np.concatenate([fold for j, fold in enumerate(folds) if j != i])
            model = fitter(dataset.take(np.sort(train)))
            total += model.predictive_deviance(dataset.take(test))
        return total

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            values = list(executor.map(one_repetition, children))
    else:
        values = [one_repetition(child) for child in children]
    return np.asarray(values)
