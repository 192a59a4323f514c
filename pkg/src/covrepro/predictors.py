"""Factor score predictor weights and the covariances they reproduce.

Any weight matrix ``B`` defines regression components with loading pattern
``A = Sigma B (B' Sigma B)^-1`` and covariance ``C = B' Sigma B``; the
covariance reproduced from them is ``A C A' = Sigma B (B' Sigma B)^-1 B' Sigma``.
For the regression, Bartlett and Anderson-Rubin predictors this coincides
with the closed form ``Lambda (Lambda' Sigma^-1 Lambda)^-1 Lambda'``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NotPositiveDefinite, SingularLoadings
from .matops import inv_sqrt_spd, invert_spd, symmetrize
from .model import PopulationModel, select_single_variables


class PredictorKind(str, Enum):
    REGRESSION = "regression"
    BARTLETT = "bartlett"
    ANDERSON_RUBIN = "anderson-rubin"
    SINGLE_VARIABLE = "single-variable"


class Source(str, Enum):
    FROM_WEIGHTS = "from-weights"
    CLOSED_FORM = "closed-form"
    JORESKOG = "joreskog"


@dataclass(frozen=True)
class PredictorWeights:
    kind: PredictorKind
    b: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        if np.linalg.matrix_rank(b) < b.shape[1]:
            raise SingularLoadings(f"{self.kind} weights are column-rank deficient")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "kind", PredictorKind(self.kind))


@dataclass(frozen=True)
class RegressionComponents:
    a: np.ndarray
    c: np.ndarray


@dataclass(frozen=True)
class ReproducedCov:
    sigma_rep: np.ndarray
    source: Source
    kind: PredictorKind | None = None
    components: RegressionComponents | None = None


def regression_weights(model: PopulationModel, sigma) -> PredictorWeights:
    """Thurstone's regression predictor, ``B = Sigma^-1 Lambda Phi``."""
    sigma_inv = invert_spd(sigma)
    return PredictorWeights(
        PredictorKind.REGRESSION, sigma_inv @ model.loadings @ model.phi
    )


def _psi_inv_lambda(model: PopulationModel) -> np.ndarray:
    return model.loadings / model.psi2[:, None]


def bartlett_weights(model: PopulationModel) -> PredictorWeights:
    """Bartlett's predictor, ``B = Psi^-2 Lambda (Lambda' Psi^-2 Lambda)^-1``.

    Satisfies ``Lambda' B = I``.
    """
    pl = _psi_inv_lambda(model)
    m = symmetrize(model.loadings.T @ pl)
    try:
        m_inv = invert_spd(m)
    except NotPositiveDefinite as exc:
        raise SingularLoadings("Lambda' Psi^-2 Lambda is singular") from exc
    return PredictorWeights(PredictorKind.BARTLETT, pl @ m_inv)


def anderson_rubin_weights(model: PopulationModel, sigma) -> PredictorWeights:
    """Anderson-Rubin predictor with ``B' Sigma B = I``.

    ``B = Psi^-2 Lambda (Lambda' Psi^-2 Sigma Psi^-2 Lambda)^(-1/2)``.
    """
    sigma = symmetrize(sigma)
    pl = _psi_inv_lambda(model)
    return PredictorWeights(
        PredictorKind.ANDERSON_RUBIN, pl @ inv_sqrt_spd(pl.T @ sigma @ pl)
    )


def single_variable_weights(loadings) -> PredictorWeights:
    """0/1 selector picking the highest-|loading| variable for each factor."""
    sel = select_single_variables(loadings)
    return PredictorWeights(PredictorKind.SINGLE_VARIABLE, np.array(sel.selector))


def regression_components(b, sigma) -> RegressionComponents:
    b = b.b if isinstance(b, PredictorWeights) else np.asarray(b, dtype=float)
    sigma = symmetrize(sigma)
    sb = sigma @ b
    c = symmetrize(b.T @ sb)
    return RegressionComponents(a=sb @ invert_spd(c), c=c)


def reproduce_from_weights(b, sigma) -> ReproducedCov:
    """``Sigma B (B' Sigma B)^-1 B' Sigma`` with the components A and C attached.

    A singular ``B' Sigma B`` raises :class:`NotPositiveDefinite`; it is never
    pseudo-inverted.
    """
    kind = b.kind if isinstance(b, PredictorWeights) else None
    comp = regression_components(b, sigma)
    rep = symmetrize(comp.a @ comp.c @ comp.a.T)
    return ReproducedCov(rep, Source.FROM_WEIGHTS, kind, comp)


def closed_form_reproduced(loadings, sigma) -> np.ndarray:
    """``Lambda (Lambda' Sigma^-1 Lambda)^-1 Lambda'`` for arbitrary loadings.

    Used in sample mode where no uniquenesses are needed; invariant under
    nonsingular transformations of the loadings.
    """
    lam = np.atleast_2d(np.asarray(loadings, dtype=float))
    sil = invert_spd(sigma) @ lam
    return symmetrize(lam @ invert_spd(lam.T @ sil) @ lam.T)


def conventional_reproduced(model: PopulationModel, sigma, form="closed-form") -> ReproducedCov:
    """Covariance reproduced by the conventional predictors.

    ``form="closed-form"`` evaluates ``Lambda (Lambda' Sigma^-1 Lambda)^-1 Lambda'``;
    ``form="joreskog"`` evaluates the equivalent
    ``Lambda ((Lambda' Psi^-2 Lambda)^-1 + Phi) Lambda'``, which stays well
    conditioned as the uniquenesses shrink.
    """
    form = Source(form)
    lam = model.loadings
    if form is Source.CLOSED_FORM:
        return ReproducedCov(closed_form_reproduced(lam, sigma), form)
    if form is Source.JORESKOG:
        m = symmetrize(lam.T @ _psi_inv_lambda(model))
        inner = invert_spd(m) + model.phi
        return ReproducedCov(symmetrize(lam @ inner @ lam.T), form)
    raise ValueError(f"unsupported closed form {form!r}")
