"""Population common factor models in correlation metric.

A model is ``Sigma = Lambda Phi Lambda' + Psi^2`` with unit diagonal, so the
uniquenesses are always ``1 - communality``.  The four model sets used in the
population study are perfect simple structures: each factor has
``per_factor`` salient loadings and zeros elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CommunalityAtLeastOne, NotPositiveDefinite
from .matops import spd_check, symmetrize

VARIABLE_OFFSET = 0.10
OBLIQUE_PHI = 0.40
_METRIC_TOL = 1e-10


class ModelSet(str, Enum):
    SET1 = "Set1"
    SET2 = "Set2"
    SET3 = "Set3"
    SET4 = "Set4"

    @property
    def variable(self) -> bool:
        return self in (ModelSet.SET2, ModelSet.SET4)

    @property
    def oblique(self) -> bool:
        return self in (ModelSet.SET3, ModelSet.SET4)

    @property
    def max_loading(self) -> float:
        return 0.85 if self.variable else 0.95


@dataclass(frozen=True)
class PopulationModel:
    """Loadings, factor correlations and uniquenesses of a population model.

    ``psi2`` holds the diagonal of Psi^2.  Construction checks that the model
    is in correlation metric and that every uniqueness is positive.
    """

    loadings: np.ndarray
    phi: np.ndarray
    psi2: np.ndarray

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.loadings, dtype=float))
        phi = symmetrize(np.atleast_2d(self.phi))
        psi2 = np.asarray(self.psi2, dtype=float).ravel()
        p, q = lam.shape
        if phi.shape != (q, q):
            raise ValueError(f"phi must be {q}x{q}, got {phi.shape}")
        if psi2.shape != (p,):
            raise ValueError(f"psi2 must have length {p}, got {psi2.shape}")
        if np.any(psi2 <= 0):
            raise CommunalityAtLeastOne("all uniquenesses must be positive")
        if not np.allclose(np.diag(phi), 1.0, rtol=0, atol=_METRIC_TOL):
            raise ValueError("phi must have a unit diagonal")
        if q > 1 and not spd_check(phi).is_pd:
            raise ValueError("phi must be positive definite")
        diag = np.einsum("ij,jk,ik->i", lam, phi, lam) + psi2
        if not np.allclose(diag, 1.0, rtol=0, atol=_METRIC_TOL):
            raise ValueError("model is not in correlation metric: diag(Sigma) != 1")
        for name, value in (("loadings", lam), ("phi", phi), ("psi2", psi2)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def p(self) -> int:
        return self.loadings.shape[0]

    @property
    def q(self) -> int:
        return self.loadings.shape[1]

    @property
    def communalities(self) -> np.ndarray:
        lam = self.loadings
        return np.einsum("ij,jk,ik->i", lam, self.phi, lam)

    @classmethod
    def from_loadings(cls, loadings, phi=None) -> "PopulationModel":
        """Build a correlation-metric model, deriving ``psi2 = 1 - communality``."""
        lam = np.atleast_2d(np.asarray(loadings, dtype=float))
        q = lam.shape[1]
        phi = np.eye(q) if phi is None else symmetrize(phi)
        comm = np.einsum("ij,jk,ik->i", lam, phi, lam)
        if np.any(comm >= 1.0):
            bad = int(np.argmax(comm))
            raise CommunalityAtLeastOne(
                f"variable {bad} has communality {comm[bad]:.6g} >= 1"
            )
        return cls(lam, phi, 1.0 - comm)


@dataclass(frozen=True)
class ModelSetSpec:
    """One population model from the four model sets.

    Sets 1 and 3 use constant salient loadings; Sets 2 and 4 alternate
    ``mean_loading + .10`` and ``mean_loading - .10``.  Sets 3 and 4 have
    inter-factor correlations of .40.
    """

    set_id: ModelSet
    q: int
    per_factor: int
    mean_loading: float

    def __post_init__(self):
        object.__setattr__(self, "set_id", ModelSet(self.set_id))
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.per_factor < 1:
            raise ValueError("per_factor must be >= 1")

    @property
    def loading_mode(self) -> str:
        return "variable" if self.set_id.variable else "constant"

    @property
    def phi_offdiag(self) -> float:
        return OBLIQUE_PHI if self.set_id.oblique else 0.0

    @property
    def p(self) -> int:
        return self.q * self.per_factor


def salient_loadings(mean_loading: float, per_factor: int, variable: bool) -> np.ndarray:
    """Salient loadings of one factor block.

    Variable mode alternates +.10 / -.10 starting with +.10, so an odd block
    has one more high loading than low ones.
    """
    if not variable:
        return np.full(per_factor, float(mean_loading))
    signs = np.where(np.arange(per_factor) % 2 == 0, 1.0, -1.0)
    return mean_loading + signs * VARIABLE_OFFSET


def simple_structure_loadings(salients: np.ndarray, q: int) -> np.ndarray:
    m = len(salients)
    lam = np.zeros((q * m, q))
    for f in range(q):
        lam[f * m : (f + 1) * m, f] = salients
    return lam


def build_simple_structure(spec: ModelSetSpec) -> PopulationModel:
    """Block-diagonal population model for one model-set specification."""
    sal = salient_loadings(spec.mean_loading, spec.per_factor, spec.set_id.variable)
    lam = simple_structure_loadings(sal, spec.q)
    phi = np.full((spec.q, spec.q), spec.phi_offdiag)
    np.fill_diagonal(phi, 1.0)
    return PopulationModel.from_loadings(lam, phi)


def implied_sigma(model: PopulationModel) -> np.ndarray:
    """``Lambda Phi Lambda' + Psi^2``; raises NotPositiveDefinite if inadmissible."""
    lam = model.loadings
    sigma = symmetrize(lam @ model.phi @ lam.T + np.diag(model.psi2))
    chk = spd_check(sigma)
    if not chk.is_pd:
        raise NotPositiveDefinite(
            f"implied sigma has minimum eigenvalue {chk.min_eigenvalue:.3g}",
            min_eigenvalue=chk.min_eigenvalue,
        )
    return sigma


@dataclass(frozen=True)
class SingleVariableSelection:
    chosen: tuple
    selector: np.ndarray = field(repr=False)


def select_single_variables(loadings) -> SingleVariableSelection:
    """Pick one distinct variable per factor, maximising the summed |loading|.

    When every factor's largest absolute loading sits on a different
    variable this is the per-column argmax (ties go to the lowest index);
    otherwise the conflict is resolved by maximum-weight assignment.
    """
    a = np.abs(np.atleast_2d(np.asarray(loadings, dtype=float)))
    p, q = a.shape
    if p < q:
        raise ValueError(f"need at least as many variables ({p}) as factors ({q})")
    chosen = np.argmax(a, axis=0)
    if len(set(chosen.tolist())) < q:
        rows, cols = linear_sum_assignment(a, maximize=True)
        chosen = np.empty(q, dtype=int)
        chosen[cols] = rows
    selector = np.zeros((p, q))
    selector[chosen, np.arange(q)] = 1.0
    selector.setflags(write=False)
    return SingleVariableSelection(tuple(int(i) for i in chosen), selector)
