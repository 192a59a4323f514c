"""Symmetric matrix decompositions with a single positive-definiteness policy.

Every numerically delicate step in the package (inverses of correlation
matrices, inverse square roots, Cholesky factors for sampling) goes through
this module so the tolerance policy lives in one place.

Symmetric matrices are plain ``numpy.ndarray`` objects; :func:`symmetrize`
is applied on the way in so that downstream algebra sees exact symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefinite

PD_TOL = 1e-10


@dataclass(frozen=True)
class SpdCheck:
    min_eigenvalue: float
    is_pd: bool
    tolerance: float = PD_TOL


def symmetrize(m) -> np.ndarray:
    """Return ``(M + M') / 2`` as a float array; rejects non-square input."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return (a + a.T) / 2.0


def spd_check(m, tol: float = PD_TOL) -> SpdCheck:
    """Check positive definiteness relative to the largest diagonal entry.

    For correlation matrices the scale is 1, so the relative and absolute
    tolerances coincide.
    """
    a = symmetrize(m)
    w = np.linalg.eigvalsh(a)
    scale = max(float(np.max(np.abs(np.diag(a)))), 1.0) if a.size else 1.0
    lo = float(w[0]) if w.size else 0.0
    threshold = tol * scale
    return SpdCheck(min_eigenvalue=lo, is_pd=lo > threshold, tolerance=threshold)


def _require_pd(a: np.ndarray, tol: float, what: str) -> None:
    chk = spd_check(a, tol)
    if not chk.is_pd:
        raise NotPositiveDefinite(
            f"{what}: minimum eigenvalue {chk.min_eigenvalue:.3g} "
            f"<= tolerance {chk.tolerance:.3g}",
            min_eigenvalue=chk.min_eigenvalue,
        )


def invert_spd(m, tol: float = PD_TOL) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If the smallest eigenvalue is at or below ``tol`` times the largest
        diagonal entry.
    """
    a = symmetrize(m)
    _require_pd(a, tol, "invert_spd")
    c = scipy.linalg.cho_factor(a, lower=True)
    inv = scipy.linalg.cho_solve(c, np.eye(a.shape[0]))
    return symmetrize(inv)


def inv_sqrt_spd(m, tol: float = PD_TOL) -> np.ndarray:
    """Symmetric inverse square root ``V diag(w^-1/2) V'`` via eigendecomposition."""
    a = symmetrize(m)
    _require_pd(a, tol, "inv_sqrt_spd")
    w, v = np.linalg.eigh(a)
    return symmetrize((v / np.sqrt(w)) @ v.T)


def cholesky_lower(m, tol: float = PD_TOL) -> np.ndarray:
    """Lower Cholesky factor ``L`` with ``L L' = M``."""
    a = symmetrize(m)
    _require_pd(a, tol, "cholesky_lower")
    return np.linalg.cholesky(a)
