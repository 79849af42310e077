"""Penalized cubic regression splines for smooth covariate effects.

A basis of dimension k interpolates function values at k knots with a natural
cubic spline; the penalty is the integrated squared second derivative. Terms
are centered against the intercept, so a term contributes k - 1 columns.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from fusetree import constants
from fusetree.errors import SingularDesignError, SmoothingError
from fusetree.model.glm import Family, GlmFit, Penalty, fit_glm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplineBasis:
    """Cubic regression spline basis for one metric covariate.

    Attributes:
        variable: Covariate name
        knots: Strictly increasing knot locations
        second_derivatives: Map from knot values to second derivatives at all knots
        raw_penalty: Scaled penalty on the knot-value coefficients
        constraint: Orthonormal map from centered to knot-value coefficients
    """

    variable: str
    knots: np.ndarray
    second_derivatives: np.ndarray
    raw_penalty: np.ndarray
    constraint: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.knots.shape[0])

    @property
    def n_columns(self) -> int:
        """Design columns contributed after centering."""
        return self.dim - 1

    @property
    def penalty(self) -> np.ndarray:
        """Penalty on the centered coefficients."""
        P = self.constraint.T @ self.raw_penalty @ self.constraint
        return (P + P.T) / 2.0

    @property
    def column_names(self) -> Tuple[str, ...]:
        return tuple(f"s({self.variable}).{j}" for j in range(1, self.n_columns + 1))

    def raw_matrix(self, x: np.ndarray) -> np.ndarray:
        """Basis evaluated at x in the knot-value parameterization.

        Outside the knot range the spline continues linearly.
        """
        x = np.asarray(x, dtype=float)
        knots, F = self.knots, self.second_derivatives
        k = self.dim
        h = np.diff(knots)
        rows = np.arange(x.shape[0])
        X = np.zeros((x.shape[0], k))

        j = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, k - 2)
        inside = (x >= knots[0]) & (x <= knots[-1])
        r, jj, xi = rows[inside], j[inside], x[inside]
        hj = h[jj]
        right = knots[jj + 1] - xi
        left = xi - knots[jj]
        np.add.at(X, (r, jj), right / hj)
        np.add.at(X, (r, jj + 1), left / hj)
        X[r] += ((right**3 / hj - hj * right) / 6.0)[:, None] * F[jj]
        X[r] += ((left**3 / hj - hj * left) / 6.0)[:, None] * F[jj + 1]

        below = x < knots[0]
        if below.any():
            slope = -F[1] * h[0] / 6.0
            slope[0] -= 1.0 / h[0]
            slope[1] += 1.0 / h[0]
            dx = (x[below] - knots[0])[:, None]
            X[below] = dx * slope
            X[below, 0] += 1.0
        above = x > knots[-1]
        if above.any():
            slope = F[k - 2] * h[-1] / 6.0
            slope[k - 1] += 1.0 / h[-1]
            slope[k - 2] -= 1.0 / h[-1]
            dx = (x[above] - knots[-1])[:, None]
            X[above] = dx * slope
            X[above, k - 1] += 1.0
        return X

    def matrix(self, x: np.ndarray) -> np.ndarray:
        """Centered design columns at x."""
        return self.raw_matrix(x) @ self.constraint

    def null_space(self) -> np.ndarray:
        """Basis of the centered penalty's null space (the linear trend)."""
        values, vectors = linalg.eigh(self.penalty)
        return vectors[:, values <= values.max() * constants.NULL_SPACE_TOLERANCE]


@dataclass(frozen=True)
class SmoothTermFit:
    """Fitted smooth term f(x).

    Attributes:
        variable: Covariate name
        basis: Spline basis of the term
        coefficients: Centered coefficients
        lam: Smoothing parameter (``inf`` for the linear limit)
        edf: Effective degrees of freedom of the term
    """

    variable: str
    basis: SplineBasis
    coefficients: np.ndarray
    lam: float
    edf: float

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.basis.matrix(x) @ self.coefficients


def build_spline_basis(x: np.ndarray, dim: int = constants.DEFAULT_BASIS_DIM, variable: str = "x") -> SplineBasis:
    """Build a centered cubic regression spline basis.

    Knots sit at evenly spaced quantiles of the distinct values of x. The
    penalty is scaled so that its weakest penalized direction weighs as much as
    the whole centered design at x. A smoothing parameter lam then leaves
    curvature of relative size at most 1 / lam, whatever the scale of x.

    Raises:
        SmoothingError: When x has fewer than ``dim`` distinct values or dim < 3
    """
    x = np.asarray(x, dtype=float)
    distinct = np.unique(x)
    if dim < 3:
        raise SmoothingError(f"basis dimension for '{variable}' must be at least 3")
    if distinct.shape[0] < dim:
        raise SmoothingError(
            f"'{variable}' has {distinct.shape[0]} distinct values, basis needs {dim}"
        )
    knots = np.quantile(distinct, np.linspace(0.0, 1.0, dim))
    h = np.diff(knots)

    D = np.zeros((dim - 2, dim))
    B = np.zeros((dim - 2, dim - 2))
    for i in range(dim - 2):
        D[i, i] = 1.0 / h[i]
        D[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        D[i, i + 2] = 1.0 / h[i + 1]
        B[i, i] = (h[i] + h[i + 1]) / 3.0
        if i + 1 < dim - 2:
            B[i, i + 1] = B[i + 1, i] = h[i + 1] / 6.0
    interior = linalg.solve(B, D, assume_a="sym")
    F = np.zeros((dim, dim))
    F[1:-1] = interior
    S = D.T @ interior
    S = (S + S.T) / 2.0

    unconstrained = SplineBasis(variable, knots, F, S, np.eye(dim))
    X = unconstrained.raw_matrix(x)
    Q, _ = np.linalg.qr(X.sum(axis=0)[:, None], mode="complete")
    Z = Q[:, 1:]
    values = linalg.eigvalsh(Z.T @ S @ Z)
    weakest = np.min(values[values > values.max() * constants.NULL_SPACE_TOLERANCE])
    scale = np.linalg.norm(X @ Z, "fro") ** 2 / weakest
    return SplineBasis(variable, knots, F, S * scale, Z)


def gcv_score(fit: GlmFit) -> float:
    """Generalized cross-validation score n * D / (n - edf)^2."""
    resid_df = fit.n_obs - fit.edf
    if resid_df <= 0:
        return np.inf
    return fit.n_obs * fit.deviance / resid_df**2


def select_lambdas(
    X: np.ndarray,
    y: np.ndarray,
    family: Family,
    blocks: Dict[str, Tuple[slice, np.ndarray]],
    names: Optional[Sequence[str]] = None,
    grid: np.ndarray = constants.LAMBDA_GRID,
    max_iter: int = constants.MAX_ITER,
    tol: float = constants.DEVIANCE_TOLERANCE,
) -> Dict[str, float]:
    """Choose one smoothing parameter per penalized block by GCV.

    Blocks are visited in order; each is tuned over the grid with the others
    held at their current values (initially the grid's geometric middle).
    Ties and flat profiles resolve to the smallest grid value.
    """
    lams = {name: float(grid[len(grid) // 2]) for name in blocks}
    for name in blocks:
        scores = np.full(len(grid), np.inf)
        for i, lam in enumerate(grid):
            trial = dict(lams, **{name: float(lam)})
            penalty = Penalty(tuple((cols, S, trial[b]) for b, (cols, S) in blocks.items()))
            try:
                fit = fit_glm(X, y, family, penalty=penalty, names=names, max_iter=max_iter, tol=tol)
            except SingularDesignError:
                continue
            scores[i] = gcv_score(fit)
        if np.isfinite(scores).any():
            lowest = np.min(scores)
            best = int(np.flatnonzero(scores <= lowest + constants.TIE_TOLERANCE * abs(lowest))[0])
        else:
            best = 0
        lams[name] = float(grid[best])
        logger.debug("smoothing parameter for %s: %.4g (GCV %.6g)", name, lams[name], scores[best])
    return lams


def select_smoothing(
    X_fixed: np.ndarray,
    basis: SplineBasis,
    x: np.ndarray,
    y: np.ndarray,
    family: Family,
    grid: np.ndarray = constants.LAMBDA_GRID,
) -> float:
    """Smoothing parameter of one smooth term minimizing GCV over the grid.

    Args:
        X_fixed: Unpenalized columns (intercept, splits, linear terms)
        basis: Basis of the smooth term
        x: Covariate values
        y: Response
        family: Exponential family
        grid: Candidate smoothing parameters in increasing order
    """
    p = X_fixed.shape[1]
    X = np.hstack([X_fixed, basis.matrix(x)])
    blocks = {basis.variable: (slice(p, p + basis.n_columns), basis.penalty)}
    return select_lambdas(X, y, family, blocks, grid=grid)[basis.variable]


def fit_smooth(
    X_fixed: np.ndarray,
    basis: SplineBasis,
    x: np.ndarray,
    y: np.ndarray,
    family: Family,
    lam: float,
) -> Tuple[GlmFit, SmoothTermFit]:
    """Fit fixed columns plus one smooth term at a given smoothing parameter.

    ``lam=np.inf`` gives the exact limit in which the term is restricted to the
    penalty null space, i.e. a linear trend.
    """
    p = X_fixed.shape[1]
    if np.isinf(lam):
        N = basis.null_space()
        fit = fit_glm(np.hstack([X_fixed, basis.matrix(x) @ N]), y, family)
        coefficients = N @ fit.coefficients[p:]
        edf = float(N.shape[1])
    else:
        cols = slice(p, p + basis.n_columns)
        penalty = Penalty(((cols, basis.penalty, lam),))
        fit = fit_glm(np.hstack([X_fixed, basis.matrix(x)]), y, family, penalty=penalty)
        coefficients = fit.coefficients[cols]
        edf = float(np.sum(fit.edf_columns[cols]))
    return fit, SmoothTermFit(basis.variable, basis, coefficients, float(lam), edf)


def smooth_grid(term: SmoothTermFit, points: int = constants.SMOOTH_GRID_POINTS) -> pd.DataFrame:
    """Fitted smooth on an even grid over the knot range, for plotting."""
    x = np.linspace(term.basis.knots[0], term.basis.knots[-1], points)
    return pd.DataFrame({"x": x, "f": term.evaluate(x)})
