"""Population and sample sweeps over model conditions.

Replication streams are keyed by ``(master_seed, condition coordinates,
replication index)``, so any condition can be rerun in isolation and results
do not depend on worker count or completion order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import groupby

import numpy as np

from .errors import CovReproError, InconsistentCoordinates
from .metrics import delta_pair, delta_pair_from, paper_grid
from .model import ModelSet, ModelSetSpec, build_simple_structure, implied_sigma
from .efa import correlation_matrix, rotate, sample_data, uls_extract

log = logging.getLogger(__name__)

SAMPLE_CELLS = ((1, False), (3, False), (3, True), (9, False), (9, True))
LOADING_MODES = ("constant", "variable")


@dataclass(frozen=True)
class SweepRecord:
    """Aggregated result of one condition.

    Population records carry ``n=0``, ``reps=1`` and zero diagnostics;
    ``cell`` holds the model set for population records.
    """

    cell: str
    q: int
    per_factor: int
    l: float
    loading_mode: str
    phi: float
    n: int
    reps: int
    delta_r_mean: float
    delta_b_mean: float
    gap_mean: float
    gap_sd: float = 0.0
    nonconverged: int = 0
    heywood_events: int = 0

    @property
    def oblique(self) -> bool:
        return self.phi != 0


@dataclass(frozen=True)
class PopulationGrid:
    sets: tuple = tuple(ModelSet)
    q_range: tuple = tuple(range(1, 11))
    per_factor_range: tuple = tuple(range(2, 11))
    l_grids: dict | None = None

    def loadings_for(self, set_id) -> list[float]:
        set_id = ModelSet(set_id)
        if self.l_grids and set_id.value in self.l_grids:
            grid = list(self.l_grids[set_id.value])
        else:
            grid = paper_grid(set_id)
        if set_id.variable and any(l + 0.1 >= 1 for l in grid):
            raise ValueError(f"{set_id.value}: variable loadings need l < .90")
        return grid


def run_population_sweep(grid: PopulationGrid = PopulationGrid(), denominator: str = "offdiag") -> list[SweepRecord]:
    out = []
    for set_id in map(ModelSet, grid.sets):
        for q in grid.q_range:
            for m in grid.per_factor_range:
                for l in grid.loadings_for(set_id):
                    spec = ModelSetSpec(set_id, q, m, l)
                    try:
                        dp = delta_pair(build_simple_structure(spec), denominator=denominator)
                    except CovReproError as exc:
                        raise type(exc)(f"{set_id.value} q={q} per_factor={m} l={l}: {exc}") from exc
                    out.append(
                        SweepRecord(
                            set_id.value, q, m, l, spec.loading_mode, spec.phi_offdiag,
                            0, 1, dp.delta_r, dp.delta_b, dp.gap,
                        )
                    )
    return out


@dataclass(frozen=True)
class SampleCondition:
    q: int
    oblique: bool
    per_factor: int
    l: float
    loading_mode: str
    n: int

    @property
    def cell(self) -> str:
        return f"q{self.q}-{'obl' if self.oblique else 'orth'}"

    @property
    def set_id(self) -> ModelSet:
        table = {
            (False, "constant"): ModelSet.SET1,
            (False, "variable"): ModelSet.SET2,
            (True, "constant"): ModelSet.SET3,
            (True, "variable"): ModelSet.SET4,
        }
        return table[(self.oblique, self.loading_mode)]

    def seed_key(self) -> tuple:
        mode = LOADING_MODES.index(self.loading_mode)
        return (self.q, int(self.oblique), self.per_factor, int(round(self.l * 1000)), mode, self.n)


@dataclass(frozen=True)
class SampleGrid:
    cells: tuple = SAMPLE_CELLS
    per_factor_range: tuple = tuple(range(3, 11))
    l_levels: tuple = (0.40, 0.60, 0.80)
    loading_modes: tuple = LOADING_MODES
    n_levels: tuple = (150, 300, 900)
    replications: int = 250
    master_seed: int = 20141125
    target: str = "sample"
    denominator: str = "offdiag"

    def __post_init__(self):
        if self.replications < 2:
            raise ValueError("replications must be >= 2")
        if self.target not in ("sample", "population"):
            raise ValueError("target must be 'sample' or 'population'")
        for q, obl in self.cells:
            if obl and q < 2:
                raise ValueError("an oblique cell needs at least two factors")

    def conditions(self) -> list[SampleCondition]:
        return [
            SampleCondition(q, bool(obl), m, float(l), mode, n)
            for q, obl in self.cells
            for m in self.per_factor_range
            for l in self.l_levels
            for mode in self.loading_modes
            for n in self.n_levels
        ]


@dataclass
class Replication:
    delta_r: float = np.nan
    delta_b: float = np.nan
    converged: bool = False
    heywood: int = 0
    failed: bool = False
    extra: dict = field(default_factory=dict)


def run_replication(cond: SampleCondition, rep: int, grid: SampleGrid, keep_solution: bool = False) -> Replication:
    """One data set: sample, correlate, extract, rotate, compute both deltas."""
    model = build_simple_structure(ModelSetSpec(cond.set_id, cond.q, cond.per_factor, cond.l))
    try:
        data = sample_data(model, cond.n, (grid.master_seed, *cond.seed_key(), rep))
        r = correlation_matrix(data)
        sol = uls_extract(r, cond.q)
        sol = rotate(sol, "promax" if cond.oblique else "varimax")
        target = r if grid.target == "sample" else implied_sigma(model)
        dp = delta_pair_from(target, sol.unrotated, sol.loadings, reproduce_sigma=r, denominator=grid.denominator)
    except (CovReproError, np.linalg.LinAlgError) as exc:
        log.debug("replication %d of %s failed: %s", rep, cond, exc)
        return Replication(failed=True)
    out = Replication(dp.delta_r, dp.delta_b, sol.converged, sol.heywood_clamped)
    if keep_solution:
        out.extra = {"solution": sol, "model": model}
    return out


def run_condition(cond: SampleCondition, grid: SampleGrid) -> SweepRecord:
    """Aggregate all replications of one condition in replication order.

    Failed replications are left out of the means and counted with the
    non-converged ones.
    """
    reps = [run_replication(cond, i, grid) for i in range(grid.replications)]
    ok = [r for r in reps if not r.failed]
    dr = np.array([r.delta_r for r in ok])
    db = np.array([r.delta_b for r in ok])
    gap = dr - db
    nonconv = sum(1 for r in reps if r.failed or not r.converged)
    heywood = sum(r.heywood for r in ok)
    return SweepRecord(
        cond.cell, cond.q, cond.per_factor, cond.l, cond.loading_mode,
        0.4 if cond.oblique else 0.0, cond.n, grid.replications,
        float(dr.mean()) if ok else float("nan"),
        float(db.mean()) if ok else float("nan"),
        float(gap.mean()) if ok else float("nan"),
        float(gap.std(ddof=1)) if len(ok) > 1 else float("nan"),
        nonconv, heywood,
    )


def _run_condition_args(args):
    return run_condition(*args)


def run_sample_sweep(grid: SampleGrid, workers: int = 1, progress=None) -> list[SweepRecord]:
    """Run every condition; records come back in condition order.

    ``progress`` is called as ``progress(index, total, record)`` after each
    condition, in condition order.
    """
    conds = grid.conditions()
    total = len(conds)
    out = []
    if workers <= 1:
        results = (run_condition(c, grid) for c in conds)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_run_condition_args, [(c, grid) for c in conds])
    try:
        for i, rec in enumerate(results):
            out.append(rec)
            if progress is not None:
                progress(i, total, rec)
    finally:
        if pool is not None:
            pool.shutdown()
    return out


_STATS = ("delta_r_mean", "delta_b_mean", "gap_mean", "gap_sd")
_COUNTS = ("nonconverged", "heywood_events")
_COORDS = ("cell", "q", "per_factor", "l", "loading_mode", "phi", "n", "reps")


def collapse(records, over: str = "q") -> list[SweepRecord]:
    """Average the delta statistics across one coordinate.

    Groups are formed on all other coordinates; every group must cover the
    same set of values of the collapsed coordinate.  The collapsed coordinate
    is reported as the first value of each group; counts are summed.
    """
    if over not in _COORDS:
        raise ValueError(f"cannot collapse over {over!r}")
    keep = [c for c in _COORDS if c != over]
    recs = sorted(records, key=lambda r: tuple(str(getattr(r, c)) for c in keep))
    out = []
    expected = None
    for _, grp in groupby(recs, key=lambda r: tuple(getattr(r, c) for c in keep)):
        grp = list(grp)
        values = sorted(getattr(r, over) for r in grp)
        if len(set(values)) != len(values):
            raise InconsistentCoordinates(f"duplicate {over} values in group {grp[0]}")
        if expected is None:
            expected = values
        elif values != expected:
            raise InconsistentCoordinates(f"groups cover different {over} values: {expected} vs {values}")
        if len(grp) == 1:
            out.append(grp[0])
            continue
        stats = {s: float(np.mean([getattr(r, s) for r in grp])) for s in _STATS}
        counts = {c: sum(getattr(r, c) for r in grp) for c in _COUNTS}
        out.append(replace(grp[0], **stats, **counts))
    order = {id(r): i for i, r in enumerate(records)}
    first = {}
    for r in records:
        first.setdefault(tuple(getattr(r, c) for c in keep), order[id(r)])
    out.sort(key=lambda r: first[tuple(getattr(r, c) for c in keep)])
    return out


def record_dict(rec: SweepRecord) -> dict:
    return asdict(rec)
