"""Numerical constants shared across fusetree modules."""

import numpy as np

# IRLS
MAX_ITER = 25
DEVIANCE_TOLERANCE = 1e-8
MU_CLAMP = 1e-10

# Relative pivot size below which a design column counts as dependent
RANK_TOLERANCE = 1e-7

# Two deviances closer than this (relative) are treated as tied in split selection
TIE_TOLERANCE = 1e-9

# Smoothing parameter grid for GCV
LAMBDA_GRID = np.logspace(-4, 6, 40)
# Penalty eigenvalues below this share of the largest span the null space
NULL_SPACE_TOLERANCE = 1e-10
DEFAULT_BASIS_DIM = 10
SMOOTH_GRID_POINTS = 200

# Bounds for cross-validation folds
MIN_FOLDS = 2
MAX_FOLDS = 20

INTERCEPT = "(Intercept)"
