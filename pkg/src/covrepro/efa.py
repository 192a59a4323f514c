"""Sample pipeline: normal data, correlations, ULS extraction, Varimax/Promax.

Extraction is iterated principal axis factoring on the reduced correlation
matrix, whose fixed point minimises the off-diagonal residual sum of squares
(the ULS / Minres criterion).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ZeroVarianceColumn
from .matops import cholesky_lower, symmetrize
from .model import PopulationModel

HEYWOOD_FLOOR = 0.001


def make_rng(seed_trace) -> np.random.Generator:
    """Counter-based generator keyed by an integer tuple (order-independent)."""
    ss = np.random.SeedSequence([int(s) for s in seed_trace])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Dataset:
    values: np.ndarray
    seed_trace: tuple = ()

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def sample_data(model: PopulationModel, n: int, seed_trace) -> Dataset:
    """Draw ``n`` rows of ``x = Lambda f + e`` with ``f ~ N(0, Phi)``, ``e ~ N(0, Psi^2)``."""
    if n < model.p + 1:
        raise ValueError(f"n={n} must be at least p+1={model.p + 1}")
    rng = make_rng(seed_trace)
    chol = cholesky_lower(model.phi)
    f = rng.standard_normal((n, model.q)) @ chol.T
    e = rng.standard_normal((n, model.p)) * np.sqrt(model.psi2)
    x = f @ model.loadings.T + e
    x.setflags(write=False)
    return Dataset(x, tuple(int(s) for s in seed_trace))


def correlation_matrix(data) -> np.ndarray:
    x = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    xc = x - x.mean(axis=0)
    ss = np.einsum("ij,ij->j", xc, xc)
    scale = np.max(np.abs(x), axis=0)
    for j, (s, m) in enumerate(zip(ss, scale)):
        if s <= (1e-13 * max(m, 1.0)) ** 2 * len(x):
            raise ZeroVarianceColumn(j)
    z = xc / np.sqrt(ss)
    r = symmetrize(z.T @ z)
    np.clip(r, -1.0, 1.0, out=r)
    np.fill_diagonal(r, 1.0)
    return r


def smc(r) -> np.ndarray:
    """Squared multiple correlations ``1 - 1/diag(R^-1)``; pseudo-inverse if singular."""
    try:
        inv = np.linalg.inv(r)
    except np.linalg.LinAlgError:
        inv = np.linalg.pinv(r)
    d = np.diag(inv)
    with np.errstate(divide="ignore"):
        out = np.where(d > 0, 1.0 - 1.0 / d, 0.0)
    return np.clip(out, 0.0, 1.0 - HEYWOOD_FLOOR)


def offdiag_residual_ssq(r, reproduced) -> float:
    res = np.asarray(r) - np.asarray(reproduced)
    np.fill_diagonal(res, 0.0)
    return float(np.sum(res**2))


def _principal_axes(reduced: np.ndarray, q: int) -> np.ndarray:
    w, v = np.linalg.eigh(reduced)
    w, v = w[::-1][:q], v[:, ::-1][:, :q]
    lam = v * np.sqrt(np.clip(w, 0.0, None))
    # fix column signs so the solution is reproducible
    signs = np.where(lam.sum(axis=0) < 0, -1.0, 1.0)
    return lam * signs


def loadings_for_uniquenesses(r, psi2, q: int) -> np.ndarray:
    """Top-q principal axes of ``R - diag(psi2)`` (negative eigenvalues clamped)."""
    reduced = np.array(r, dtype=float)
    np.fill_diagonal(reduced, 1.0 - np.asarray(psi2))
    return _principal_axes(reduced, q)


@dataclass(frozen=True)
class EfaSolution:
    loadings: np.ndarray
    unrotated: np.ndarray
    psi2_hat: np.ndarray
    phi_hat: np.ndarray
    rotation: np.ndarray
    converged: bool
    iterations: int
    heywood_clamped: int


def uls_extract(r, q: int, tol: float = 1e-6, max_iter: int = 1000, floor: float = HEYWOOD_FLOOR) -> EfaSolution:
    """Unrotated ULS solution by iterated principal axes.

    Starts from squared multiple correlations and iterates until the largest
    communality change is below ``tol``.  Uniquenesses are held at or above
    ``floor``; ``heywood_clamped`` counts variables sitting on the floor in
    the returned solution.  Hitting ``max_iter`` returns the last iterate with
    ``converged=False``.
    """
    r = symmetrize(r)
    p = r.shape[0]
    if not 1 <= q < p:
        raise ValueError(f"need 1 <= q < p, got q={q}, p={p}")
    h2 = smc(r)
    reduced = r.copy()
    converged = False
    it = 0
    lam = np.zeros((p, q))
    clamped = np.zeros(p, dtype=bool)
    while it < max_iter:
        it += 1
        np.fill_diagonal(reduced, h2)
        lam = _principal_axes(reduced, q)
        new = np.einsum("ij,ij->i", lam, lam)
        clamped = new > 1.0 - floor
        new = np.minimum(new, 1.0 - floor)
        delta = float(np.max(np.abs(new - h2)))
        h2 = new
        if delta < tol:
            converged = True
            break
    if clamped.any():
        # rescale clamped rows so communalities match the floored uniquenesses
        norms = np.sqrt(np.einsum("ij,ij->i", lam, lam))
        lam[clamped] *= (np.sqrt(1.0 - floor) / norms[clamped])[:, None]
    psi2 = 1.0 - np.einsum("ij,ij->i", lam, lam)
    return EfaSolution(
        loadings=lam,
        unrotated=lam,
        psi2_hat=np.maximum(psi2, floor),
        phi_hat=np.eye(q),
        rotation=np.eye(q),
        converged=converged,
        iterations=it,
        heywood_clamped=int(clamped.sum()),
    )


def varimax_criterion(loadings, normalize: bool = True) -> float:
    a = np.asarray(loadings, dtype=float)
    if normalize:
        a = _kaiser_normalize(a)[0]
    p = a.shape[0]
    a2 = a**2
    return float(np.sum(p * np.sum(a2**2, axis=0) - np.sum(a2, axis=0) ** 2) / p**2)


def _kaiser_normalize(a: np.ndarray):
    h = np.sqrt(np.einsum("ij,ij->i", a, a))
    h = np.where(h > 0, h, 1.0)
    return a / h[:, None], h


def varimax(unrotated, normalize: bool = True, tol: float = 1e-8, max_sweeps: int = 100):
    """Kaiser's Varimax by sweeps of pairwise planar rotations.

    Returns ``(rotated, T)`` with ``rotated = unrotated @ T`` and ``T``
    orthogonal.  Stops when a full sweep improves the criterion by less than
    ``tol``.
    """
    a0 = np.asarray(unrotated, dtype=float)
    p, q = a0.shape
    if q < 2:
        return a0.copy(), np.eye(q)
    a, h = _kaiser_normalize(a0) if normalize else (a0.copy(), np.ones(p))
    t = np.eye(q)
    crit = varimax_criterion(a, normalize=False)
    for _ in range(max_sweeps):
        for j in range(q - 1):
            for k in range(j + 1, q):
                x, y = a[:, j], a[:, k]
                u = x * x - y * y
                v = 2.0 * x * y
                sa, sb = u.sum(), v.sum()
                num = 2.0 * np.dot(u, v) - 2.0 * sa * sb / p
                den = np.dot(u, u) - np.dot(v, v) - (sa * sa - sb * sb) / p
                phi = 0.25 * np.arctan2(num, den)
                if abs(phi) < 1e-15:
                    continue
                c, s = np.cos(phi), np.sin(phi)
                a[:, j], a[:, k] = c * x + s * y, -s * x + c * y
                tj, tk = t[:, j].copy(), t[:, k].copy()
                t[:, j], t[:, k] = c * tj + s * tk, -s * tj + c * tk
        new = varimax_criterion(a, normalize=False)
        done = new - crit < tol
        crit = new
        if done:
            break
    return a0 @ t, t


def promax(unrotated, power: int = 4, normalize: bool = True):
    """Promax: Varimax, then an oblique least-squares fit to a powered target.

    Returns ``(pattern, phi_hat, T)`` where ``pattern = unrotated @ T`` and
    ``phi_hat`` is the factor correlation matrix (unit diagonal).
    """
    a0 = np.asarray(unrotated, dtype=float)
    q = a0.shape[1]
    if q < 2:
        raise ValueError("promax needs at least two factors")
    vm, tv = varimax(a0, normalize=normalize)
    target = vm * np.abs(vm) ** (power - 1)
    u = np.linalg.solve(vm.T @ vm, vm.T @ target)
    d = np.diag(np.linalg.inv(u.T @ u))
    u = u * np.sqrt(d)
    ui = np.linalg.inv(u)
    phi = symmetrize(ui @ ui.T)
    np.fill_diagonal(phi, 1.0)
    return vm @ u, phi, tv @ u


def rotate(sol: EfaSolution, method: str = "varimax", power: int = 4) -> EfaSolution:
    """Attach a rotated pattern (``"varimax"``, ``"promax"`` or ``"none"``)."""
    q = sol.unrotated.shape[1]
    if method == "none" or q == 1:
        return sol
    if method == "varimax":
        rot, t = varimax(sol.unrotated)
        phi = np.eye(q)
    elif method == "promax":
        rot, phi, t = promax(sol.unrotated, power=power)
    else:
        raise ValueError(f"unknown rotation {method!r}")
    return EfaSolution(
        loadings=rot,
        unrotated=sol.unrotated,
        psi2_hat=sol.psi2_hat,
        phi_hat=phi,
        rotation=t,
        converged=sol.converged,
        iterations=sol.iterations,
        heywood_clamped=sol.heywood_clamped,
    )


def align_columns(loadings, reference) -> np.ndarray:
    """Permute and reflect columns of ``loadings`` to best match ``reference``.

    Matching maximises the summed absolute Tucker congruence between columns.
    """
    a = np.asarray(loadings, dtype=float)
    b = np.asarray(reference, dtype=float)
    na = np.linalg.norm(a, axis=0)
    nb = np.linalg.norm(b, axis=0)
    cong = (a.T @ b) / np.outer(np.where(na > 0, na, 1), np.where(nb > 0, nb, 1))
    rows, cols = linear_sum_assignment(np.abs(cong), maximize=True)
    out = np.zeros_like(b)
    for i, j in zip(rows, cols):
        out[:, j] = a[:, i] * (1.0 if cong[i, j] >= 0 else -1.0)
    return out
