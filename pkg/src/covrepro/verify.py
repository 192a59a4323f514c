"""Numerical checks of the exactness, threshold and small-loading results.

Each check runs the full matrix pipeline (model -> implied sigma -> weights
-> reproduced covariance) and compares it against the corresponding closed
form, returning a :class:`TheoremReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import block_offdiag_ssq, loading_grid, paper_grid, threshold_scan
from .model import ModelSet, ModelSetSpec, PopulationModel, build_simple_structure, implied_sigma
from .predictors import closed_form_reproduced, reproduce_from_weights, single_variable_weights

EXACT_TOL = 1e-12
INEXACT_TOL = 1e-8
H_THRESHOLD = 3 ** -0.25


@dataclass(frozen=True)
class TheoremReport:
    theorem_id: str
    conditions_checked: int
    max_violation: float
    tolerance: float
    detail: str = ""
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.max_violation < self.tolerance))


def _single_variable_rep(model: PopulationModel, sigma) -> np.ndarray:
    return reproduce_from_weights(single_variable_weights(model.loadings), sigma).sigma_rep


def _offdiag(m: np.ndarray) -> np.ndarray:
    return m[~np.eye(m.shape[0], dtype=bool)]


def check_t31(l_grid=None, q_grid=range(1, 11), sets=(ModelSet.SET1,), tol: float = EXACT_TOL) -> TheoremReport:
    """Two salient variables per orthogonal factor: single variables are exact.

    Every off-diagonal element of the single-variable reproduction must match
    sigma; the violation is the largest off-diagonal mean squared residual.
    """
    worst, n = 0.0, 0
    for set_id in sets:
        set_id = ModelSet(set_id)
        if set_id.oblique:
            raise ValueError("exactness only holds for orthogonal model sets")
        grid = paper_grid(set_id) if l_grid is None else l_grid
        for q in q_grid:
            for l in grid:
                if set_id.variable and l + 0.1 >= 1:
                    continue
                model = build_simple_structure(ModelSetSpec(set_id, q, 2, l))
                sigma = implied_sigma(model)
                res = _offdiag(sigma - _single_variable_rep(model, sigma))
                delta_b = float(np.mean(res**2)) if res.size else 0.0
                worst = max(worst, delta_b)
                n += 1
    return TheoremReport("T31", n, worst, tol, f"max delta_b={worst:.3g}")


def closed_form_ssq_pq3(sigma_corr: float) -> tuple[float, float]:
    """Per-block off-diagonal SSQ for three equal loadings with correlation ``sigma_corr``.

    Returns ``(single_variable, conventional)`` = ``(2(s - s^2)^2, 6(1/3 - s/3)^2)``.
    """
    s = float(sigma_corr)
    return 2.0 * (s - s * s) ** 2, 6.0 * (1.0 / 3.0 - s / 3.0) ** 2


def pipeline_ssq_pq3(loading: float, q: int = 1) -> tuple[float, float, float]:
    """Matrix-pipeline per-block SSQs for a three-salient orthogonal block.

    Returns ``(single_variable, conventional, sigma_corr)`` for the first block.
    """
    model = build_simple_structure(ModelSetSpec(ModelSet.SET1, q, 3, loading))
    sigma = implied_sigma(model)
    ssq_b = block_offdiag_ssq(sigma, _single_variable_rep(model, sigma), 3)
    ssq_r = block_offdiag_ssq(sigma, closed_form_reproduced(model.loadings, sigma), 3)
    return float(ssq_b[0]), float(ssq_r[0]), float(sigma[0, 1])


def h_bracket(step: float = 0.001) -> tuple[float, float]:
    """Bracket around the loading below which single variables win for p/q = 3."""
    grid = loading_grid(step, 1.0 - step, step)
    res = threshold_scan(ModelSet.SET1, 1, 3, grid)
    if res.threshold is None or res.censored:
        return (math.nan, math.nan)
    return res.threshold, round(res.threshold + step, 10)


def check_t32(l_grid=None, tol: float = EXACT_TOL) -> TheoremReport:
    """Three equal loadings below h: single-variable SSQ is strictly smaller.

    Violation is the largest deviation of either pipeline SSQ from its closed
    form; a loading where the strict inequality fails counts as infinite.
    """
    grid = loading_grid(0.05, 0.75, 0.05) if l_grid is None else list(l_grid)
    worst, n = 0.0, 0
    for l in grid:
        if not 0 < l < H_THRESHOLD:
            raise ValueError(f"loading {l} outside (0, 3^-1/4)")
        ssq_b, ssq_r, s = pipeline_ssq_pq3(l)
        cf_b, cf_r = closed_form_ssq_pq3(s)
        worst = max(worst, abs(ssq_b - cf_b), abs(ssq_r - cf_r))
        if not ssq_b < ssq_r:
            worst = math.inf
        n += 1
    lo, hi = h_bracket()
    return TheoremReport("T32", n, worst, tol, f"h in [{lo:.3f}, {hi:.3f}]")


def check_t33(p_grid=(4, 5, 10), l_small: float = 0.001) -> TheoremReport:
    """Vanishing loadings: conventional reproduction tends to ``1/p`` off the diagonal.

    Tolerance is ``10 * l_small``.  Sigma's off-diagonals must equal
    ``l_small**2`` exactly and the single-variable reproduction must stay
    within the same tolerance of zero.
    """
    if not 0 < l_small <= 0.01:
        raise ValueError("l_small must lie in (0, .01]")
    tol = 10 * l_small
    worst, n = 0.0, 0
    worst_b = 0.0
    for p in p_grid:
        model = build_simple_structure(ModelSetSpec(ModelSet.SET1, 1, p, l_small))
        sigma = implied_sigma(model)
        rep = closed_form_reproduced(model.loadings, sigma)
        worst = max(worst, float(np.max(np.abs(_offdiag(rep) - 1.0 / p))))
        if np.any(_offdiag(sigma) != l_small * l_small):
            worst = math.inf
        rep_b = _offdiag(_single_variable_rep(model, sigma))
        worst_b = max(worst_b, float(np.max(np.abs(rep_b))))
        worst = max(worst, worst_b)
        n += 1
    return TheoremReport(
        "T33", n, worst, tol, f"max |single-variable off-diagonal|={worst_b:.3g}"
    )


def residual_counts(per_factor: int, q: int = 1) -> tuple[int, int, int]:
    """Per-block (exact, inexact, ambiguous) off-diagonal residual counts.

    Uses generic loadings ``.5 + .02 i`` so no residual vanishes by accident.
    The counts are those of the first block; all blocks are identical.
    """
    sal = 0.5 + 0.02 * np.arange(per_factor)
    lam = np.zeros((q * per_factor, q))
    for f in range(q):
        lam[f * per_factor : (f + 1) * per_factor, f] = sal
    model = PopulationModel.from_loadings(lam)
    sigma = implied_sigma(model)
    res = np.abs(sigma - _single_variable_rep(model, sigma))
    blk = _offdiag(res[:per_factor, :per_factor])
    exact = int(np.sum(blk < EXACT_TOL))
    inexact = int(np.sum(blk > INEXACT_TOL))
    return exact, inexact, blk.size - exact - inexact


def check_residual_counts(per_factor_grid=range(3, 11), q: int = 2) -> TheoremReport:
    """Exact residuals number ``2(m-1)`` per block, inexact ``(m-1)(m-2)``."""
    worst, n = 0, 0
    for m in per_factor_grid:
        if m < 3:
            raise ValueError("per_factor must be >= 3")
        exact, inexact, ambiguous = residual_counts(m, q)
        worst = max(
            worst,
            abs(exact - 2 * (m - 1)),
            abs(inexact - (m - 1) * (m - 2)),
            ambiguous,
        )
        n += 1
    return TheoremReport("ResidualCount", n, float(worst), 0.5)


def run_all(tolerance: float | None = None) -> list[TheoremReport]:
    """All reports at their default grids; ``tolerance`` overrides every tolerance."""
    reports = [
        check_t31(sets=(ModelSet.SET1, ModelSet.SET2)),
        check_t32(),
        check_t33(),
        check_residual_counts(),
    ]
    if tolerance is None:
        return reports
    return [
        TheoremReport(r.theorem_id, r.conditions_checked, r.max_violation, tolerance, r.detail)
        for r in reports
    ]
