"""fusetree - tree-structured clustering of categorical predictors.

Fits generalized linear and additive models whose ordinal and nominal
predictors have their levels fused into clusters by forward selection of
splits, with p-value, information-criterion and cross-validation stopping,
bootstrap stability and a simulation study of the stopping rules.
"""

__version__ = "0.1.0"
__author__ = "theradtad"
__email__ = "anurag.parvatikar@gmail.com"
