"""Single-variable versus conventional factor score predictors.

Tools for comparing how well different factor score predictors reproduce the
off-diagonal part of an observed correlation matrix, in population models and
in simulated samples.
"""

from .errors import (
    CommunalityAtLeastOne,
    ConfigError,
    DimensionMismatch,
    EmptyGrid,
    InconsistentCoordinates,
    NonConvergence,
    NotPositiveDefinite,
    ParseError,
    SingularLoadings,
    ZeroVarianceColumn,
)
from .model import ModelSetSpec, PopulationModel, build_simple_structure, implied_sigma
from .predictors import (
    PredictorWeights,
    ReproducedCov,
    anderson_rubin_weights,
    bartlett_weights,
    conventional_reproduced,
    regression_weights,
    reproduce_from_weights,
)
from .metrics import DeltaPair, delta_pair, offdiag_msq, threshold_scan

__version__ = "0.1.0"

__all__ = [
    "CommunalityAtLeastOne",
    "ConfigError",
    "DeltaPair",
    "DimensionMismatch",
    "EmptyGrid",
    "InconsistentCoordinates",
    "ModelSetSpec",
    "NonConvergence",
    "NotPositiveDefinite",
    "ParseError",
    "PopulationModel",
    "PredictorWeights",
    "ReproducedCov",
    "SingularLoadings",
    "ZeroVarianceColumn",
    "anderson_rubin_weights",
    "bartlett_weights",
    "build_simple_structure",
    "conventional_reproduced",
    "delta_pair",
    "implied_sigma",
    "offdiag_msq",
    "regression_weights",
    "reproduce_from_weights",
    "threshold_scan",
]
