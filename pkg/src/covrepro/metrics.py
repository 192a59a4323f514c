"""Off-diagonal reproduction error of conventional and single-variable predictors.

``delta_r`` is the mean squared off-diagonal difference between the target
correlation matrix and the covariance reproduced by the conventional
predictors; ``delta_b`` is the same for the single-variable predictor.  A
positive ``gap = delta_r - delta_b`` means the single variables reproduce the
off-diagonal correlations more closely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyGrid
from .model import ModelSet, ModelSetSpec, PopulationModel, build_simple_structure, implied_sigma
from .predictors import closed_form_reproduced, reproduce_from_weights, single_variable_weights

DENOMINATORS = ("offdiag", "all")


def loading_grid(lo: float, hi: float, step: float) -> list[float]:
    """Inclusive arithmetic grid with values rounded to kill accumulation noise."""
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 10) for k in range(n + 1)]


def paper_grid(set_id) -> list[float]:
    """.25 to .95 (Sets 1/3) or .85 (Sets 2/4) in steps of .05."""
    return loading_grid(0.25, ModelSet(set_id).max_loading, 0.05)


def _offdiag_residual(target, reproduced) -> np.ndarray:
    t = np.asarray(target, dtype=float)
    r = np.asarray(reproduced, dtype=float)
    if t.shape != r.shape or t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise DimensionMismatch(f"shapes {t.shape} and {r.shape} differ or are not square")
    res = t - r
    np.fill_diagonal(res, 0.0)
    return res


def offdiag_ssq(target, reproduced) -> float:
    return float(np.sum(_offdiag_residual(target, reproduced) ** 2))


def offdiag_msq(target, reproduced, denominator: str = "offdiag") -> float:
    """Mean squared off-diagonal residual.

    ``denominator="offdiag"`` divides by ``p(p-1)``, the number of
    off-diagonal cells; ``"all"`` divides by ``p**2`` (the zeroed diagonal
    counted as cells).
    """
    res = _offdiag_residual(target, reproduced)
    p = res.shape[0]
    if p < 2:
        raise DimensionMismatch("need at least two variables")
    if denominator == "offdiag":
        cells = p * (p - 1)
    elif denominator == "all":
        cells = p * p
    else:
        raise ValueError(f"denominator must be one of {DENOMINATORS}, got {denominator!r}")
    return float(np.sum(res**2)) / cells


def block_offdiag_ssq(target, reproduced, block_size: int) -> np.ndarray:
    """Off-diagonal SSQ inside each consecutive diagonal block of ``block_size``."""
    res = _offdiag_residual(target, reproduced)
    p = res.shape[0]
    if p % block_size:
        raise DimensionMismatch(f"p={p} is not a multiple of block size {block_size}")
    out = []
    for start in range(0, p, block_size):
        blk = res[start : start + block_size, start : start + block_size]
        out.append(float(np.sum(blk**2)))
    return np.array(out)


@dataclass(frozen=True)
class DeltaPair:
    delta_r: float
    delta_b: float
    gap: float
    chosen: tuple = ()


def delta_pair_from(
    target,
    conventional_loadings,
    selection_loadings,
    reproduce_sigma=None,
    denominator: str = "offdiag",
) -> DeltaPair:
    """Delta pair for arbitrary loadings.

    ``reproduce_sigma`` is the matrix the predictors are built from (defaults
    to ``target``).  The conventional reproduction uses
    ``conventional_loadings``; the single variables are chosen from
    ``selection_loadings`` (these differ in sample mode: unrotated vs rotated).
    """
    sig = target if reproduce_sigma is None else reproduce_sigma
    sigma_r = closed_form_reproduced(conventional_loadings, sig)
    w = single_variable_weights(selection_loadings)
    sigma_b = reproduce_from_weights(w, sig).sigma_rep
    dr = offdiag_msq(target, sigma_r, denominator)
    db = offdiag_msq(target, sigma_b, denominator)
    chosen = tuple(int(i) for i in w.b.argmax(axis=0))
    return DeltaPair(dr, db, dr - db, chosen)


def delta_pair(model: PopulationModel, sigma=None, denominator: str = "offdiag") -> DeltaPair:
    """Population delta pair; ``sigma`` defaults to the model-implied matrix."""
    if sigma is None:
        sigma = implied_sigma(model)
    return delta_pair_from(sigma, model.loadings, model.loadings, denominator=denominator)


@dataclass(frozen=True)
class ThresholdResult:
    per_factor: int
    threshold: float | None
    censored: bool
    grid_step: float | None


def threshold_scan(set_id, q: int, per_factor: int, l_grid=None, denominator: str = "offdiag") -> ThresholdResult:
    """Largest grid loading at which the single-variable predictor wins.

    Returns ``censored=True`` with the grid maximum when the gap is positive
    everywhere on the grid, and ``threshold=None`` when it is positive
    nowhere.
    """
    grid = paper_grid(set_id) if l_grid is None else [float(x) for x in l_grid]
    if not grid:
        raise EmptyGrid("loading grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("loading grid must be strictly ascending")
    step = round(grid[1] - grid[0], 12) if len(grid) > 1 else None
    positive = []
    for l in grid:
        model = build_simple_structure(ModelSetSpec(set_id, q, per_factor, l))
        positive.append(delta_pair(model, denominator=denominator).gap > 0)
    if all(positive):
        return ThresholdResult(per_factor, grid[-1], True, step)
    winners = [l for l, ok in zip(grid, positive) if ok]
    return ThresholdResult(per_factor, winners[-1] if winners else None, False, step)
