"""Command-line interface.

Commands: ``verify``, ``population-sweep``, ``sample-sweep``, ``analyze`` and
``threshold``.  Every command accepts ``--config FILE``, a flat
``key = value`` file whose keys are the long option names; options given on
the command line override the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import report
from .efa import correlation_matrix, rotate, uls_extract
from .errors import ConfigError, CovReproError, ParseError
from .metrics import delta_pair_from, loading_grid, threshold_scan
from .model import ModelSet
from .sim import (
    SAMPLE_CELLS,
    PopulationGrid,
    SampleGrid,
    collapse,
    run_population_sweep,
    run_sample_sweep,
)
from .verify import run_all

log = logging.getLogger("covrepro")

FULL_REPLICATIONS = 5000


# ---------------------------------------------------------------- parsing


def int_list(text: str) -> tuple:
    """``"3-10"`` or ``"1,3,9"`` (ranges and items may be mixed)."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return tuple(out)


def float_list(text: str) -> tuple:
    try:
        vals = tuple(float(p) for p in str(text).split(",") if p.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def str_list(text: str) -> tuple:
    return tuple(p.strip() for p in str(text).split(",") if p.strip())


def cell_list(text: str) -> tuple:
    """Cells as ``q1-orth,q3-obl`` (``all`` for the five standard cells)."""
    if str(text).strip() == "all":
        return SAMPLE_CELLS
    cells = []
    for name in str_list(text):
        try:
            q, kind = name.lstrip("q").split("-")
            cells.append((int(q), {"orth": False, "obl": True}[kind]))
        except (ValueError, KeyError):
            raise argparse.ArgumentTypeError(f"bad cell {name!r}; expected e.g. q3-obl") from None
    return tuple(cells)


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def read_config(path) -> list[tuple[int, str, str]]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            entries.append((lineno, key.replace("-", "_"), value))
    return entries


def apply_config(sub: argparse.ArgumentParser, path) -> None:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for lineno, key, value in read_config(path):
        action = actions.get(key)
        if action is None or not action.option_strings:
            raise ConfigError(f"{path}:{lineno}: unknown field {key!r}")
        try:
            if isinstance(action, argparse._StoreTrueAction):
                parsed = value.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                parsed = action.type(value)
            else:
                parsed = value
            if action.choices is not None and parsed not in action.choices:
                raise ValueError(f"must be one of {sorted(action.choices)}")
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: field {key!r}: {exc}") from None
        defaults[key] = parsed
    sub.set_defaults(**defaults)


# ---------------------------------------------------------------- commands


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_verify(args) -> int:
    reports = run_all(tolerance=args.tolerance)
    out = _out_dir(args)
    rows = [
        (r.theorem_id, r.conditions_checked, r.max_violation, r.tolerance, r.passed, r.detail)
        for r in reports
    ]
    report.write_csv(out / "verify_report.csv", report.VERIFY_COLUMNS, rows)
    print(f"{'theorem':<14}{'checked':>8}  {'max violation':>14}  {'tolerance':>10}  result")
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.theorem_id:<14}{r.conditions_checked:>8}  {r.max_violation:>14.3g}  "
              f"{r.tolerance:>10.3g}  {status}  {r.detail}")
    return 0 if all(r.passed for r in reports) else 1


def thresholds_from_records(records) -> list[tuple]:
    """Per (set, per_factor): largest l with positive gap after collapsing over q."""
    rows = []
    collapsed = collapse(records, over="q")
    keyed = {}
    for r in collapsed:
        keyed.setdefault((r.cell, r.per_factor), []).append(r)
    for (set_id, m), recs in keyed.items():
        recs.sort(key=lambda r: r.l)
        positive = [r.gap_mean > 0 for r in recs]
        if all(positive):
            rows.append((set_id, m, recs[-1].l, True))
        else:
            winners = [r.l for r, ok in zip(recs, positive) if ok]
            rows.append((set_id, m, winners[-1] if winners else None, False))
    return rows


def cmd_population_sweep(args) -> int:
    grid = PopulationGrid(
        sets=tuple(ModelSet(s) for s in args.sets),
        q_range=args.q,
        per_factor_range=args.per_factor,
        l_grids={s: args.l for s in args.sets} if args.l else None,
    )
    records = run_population_sweep(grid, denominator=args.msq_denominator)
    out = _out_dir(args)
    report.write_csv(out / "population_sweep.csv", report.POPULATION_COLUMNS, report.population_rows(records))
    thresholds = thresholds_from_records(records)
    report.write_csv(out / "thresholds.csv", report.THRESHOLD_COLUMNS, thresholds)
    if args.svg:
        for set_id in grid.sets:
            recs = [r for r in collapse(records, over="q") if r.cell == set_id.value]
            ls = sorted({r.l for r in recs})
            ms = sorted({r.per_factor for r in recs})
            cells = {(r.l, r.per_factor): r.gap_mean for r in recs}
            svg = report.heatmap_svg(f"{set_id.value}: delta_r - delta_b (collapsed over q)", ls, ms, cells)
            (out / f"gap_{set_id.value}.svg").write_text(svg, encoding="utf-8")
    print(f"wrote {len(records)} rows to {out / 'population_sweep.csv'}")
    return 0


def cmd_sample_sweep(args) -> int:
    reps = FULL_REPLICATIONS if args.full else args.reps
    grid = SampleGrid(
        cells=args.cells,
        per_factor_range=args.per_factor,
        l_levels=args.l,
        loading_modes=args.modes,
        n_levels=args.n,
        replications=reps,
        master_seed=args.seed,
        target=args.target,
        denominator=args.msq_denominator,
    )

    def progress(i, total, rec):
        print(f"[{i + 1}/{total}] {rec.cell} p/q={rec.per_factor} l={rec.l:g} "
              f"{rec.loading_mode} n={rec.n}: gap_mean={rec.gap_mean:.6g}", file=sys.stderr)

    records = run_sample_sweep(grid, workers=args.workers, progress=progress)
    out = _out_dir(args)
    report.write_csv(out / "sample_sweep.csv", report.SAMPLE_COLUMNS, report.sample_rows(records))
    print(f"wrote {len(records)} rows to {out / 'sample_sweep.csv'}")
    return 0


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_data_csv(path) -> tuple[np.ndarray, list[str]]:
    """Numeric matrix with an optional header row; LF or CRLF line endings."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if any(c.strip() for c in row)]
    if not rows:
        raise ParseError(f"{path}: no data")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    width = len(header) if header else len(rows[0]) if rows else 0
    values = []
    for i, row in enumerate(rows, start=2 if header else 1):
        if len(row) != width:
            raise ParseError(f"{path}: row {i} has {len(row)} fields, expected {width}", row=i)
        parsed = []
        for j, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {i}, column {j}: not a number: {cell!r}", row=i, column=j) from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: row {i}, column {j}: non-finite value", row=i, column=j)
            parsed.append(v)
        values.append(parsed)
    x = np.array(values, dtype=float).reshape(len(values), width)
    names = header or [f"x{j + 1}" for j in range(width)]
    return x, names


def analyze(x: np.ndarray, q: int, rotation: str = "varimax", names=None) -> dict:
    """Run the sample pipeline on raw data and return a report dictionary."""
    n, p = x.shape
    if n <= p:
        raise ParseError(f"need more observations than variables (n={n}, p={p})")
    names = names or [f"x{j + 1}" for j in range(p)]
    r = correlation_matrix(x)
    sol = rotate(uls_extract(r, q), rotation if q > 1 else "none")
    dp = delta_pair_from(r, sol.unrotated, sol.loadings)
    salient = np.max(np.abs(sol.loadings), axis=1)
    mean_l = float(np.mean(salient))
    per_factor = p / q
    rule = "none"
    if mean_l <= 0.40 and per_factor <= 6:
        rule = "single-variable"
    elif mean_l > 0.60 and per_factor > 6:
        rule = "conventional"
    return {
        "n": n,
        "p": p,
        "q": q,
        "rotation": rotation if q > 1 else "none",
        "converged": sol.converged,
        "iterations": sol.iterations,
        "heywood_clamped": sol.heywood_clamped,
        "delta_r": dp.delta_r,
        "delta_b": dp.delta_b,
        "gap": dp.gap,
        "chosen": [names[i] for i in dp.chosen],
        "recommendation": "single-variable" if dp.gap > 0 else "conventional",
        "mean_salient_loading": mean_l,
        "variables_per_factor": per_factor,
        "rule_of_thumb": rule,
    }


def cmd_analyze(args) -> int:
    x, names = read_data_csv(args.data)
    res = analyze(x, args.q, args.rotation, names)
    print(f"n={res['n']} p={res['p']} q={res['q']} rotation={res['rotation']}")
    if not res["converged"]:
        print(f"warning: ULS extraction did not converge after {res['iterations']} iterations")
    if res["heywood_clamped"]:
        print(f"warning: {res['heywood_clamped']} uniqueness(es) clamped at the Heywood floor")
    print(f"delta_r (conventional predictors) = {res['delta_r']:.6g}")
    print(f"delta_b (single variables)        = {res['delta_b']:.6g}")
    print(f"gap                               = {res['gap']:.6g}")
    for f, name in enumerate(res["chosen"], 1):
        print(f"factor {f}: {name}")
    print(f"recommendation: {res['recommendation']}")
    hint = {
        "single-variable": "small loadings (<= .40) with <= 6 variables per factor favour single variables",
        "conventional": "large loadings (> .60) with > 6 variables per factor favour conventional predictors",
        "none": "outside both rule-of-thumb regions",
    }[res["rule_of_thumb"]]
    print(f"rule of thumb (l={res['mean_salient_loading']:.2f}, "
          f"p/q={res['variables_per_factor']:.3g}): {hint}")
    if args.out:
        out = _out_dir(args)
        (out / "analyze_report.json").write_text(json.dumps(res, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_threshold(args) -> int:
    grid = loading_grid(args.lo, args.hi, args.step)
    res = threshold_scan(args.set, args.q, args.per_factor, grid, denominator=args.msq_denominator)
    if res.threshold is None:
        print(f"{args.set} p/q={args.per_factor}: gap <= 0 everywhere on [{args.lo}, {args.hi}]")
    elif res.censored:
        print(f"{args.set} p/q={args.per_factor}: gap > 0 on the whole grid (censored at {res.threshold:g})")
    else:
        print(f"{args.set} p/q={args.per_factor}: threshold {res.threshold:g} (grid step {args.step:g})")
    return 0


# ---------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covrepro", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)

    def shared(sp, seed=False, workers=False, reps=False, svg=False):
        sp.add_argument("--config", help="flat key = value file; command-line options win")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--msq-denominator", choices=("offdiag", "all"), default="offdiag",
                        help="divide residual SSQ by p(p-1) (default) or p^2")
        if seed:
            sp.add_argument("--seed", type=int, default=20141125, help="master seed")
        if workers:
            sp.add_argument("--workers", type=positive_int, default=1, help="worker processes")
        if reps:
            sp.add_argument("--reps", type=int, default=250, help="replications per condition")
        if svg:
            sp.add_argument("--svg", action="store_true", help="also write gap heatmaps")

    sp = subs.add_parser("verify", help="numerically check the exactness/threshold/limit results")
    shared(sp)
    sp.add_argument("--tolerance", type=float, default=None, help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_verify)

    sp = subs.add_parser("population-sweep", help="population model sweep")
    shared(sp, svg=True)
    sp.add_argument("--sets", type=str_list, default=tuple(s.value for s in ModelSet),
                    help="comma list of Set1..Set4")
    sp.add_argument("--q", type=int_list, default=tuple(range(1, 11)))
    sp.add_argument("--per-factor", type=int_list, default=tuple(range(2, 11)))
    sp.add_argument("--l", type=float_list, default=None, help="override the loading grid")
    sp.set_defaults(func=cmd_population_sweep)

    sp = subs.add_parser("sample-sweep", help="Monte Carlo sample sweep")
    shared(sp, seed=True, workers=True, reps=True)
    sp.add_argument("--cells", type=cell_list, default=SAMPLE_CELLS,
                    help="comma list like q1-orth,q3-obl")
    sp.add_argument("--per-factor", type=int_list, default=tuple(range(3, 11)))
    sp.add_argument("--l", type=float_list, default=(0.40, 0.60, 0.80))
    sp.add_argument("--modes", type=str_list, default=("constant", "variable"),
                    help="loading modes: constant, variable")
    sp.add_argument("--n", type=int_list, default=(150, 300, 900), help="sample sizes")
    sp.add_argument("--target", choices=("sample", "population"), default="sample",
                    help="residuals against the sample R or the population sigma")
    sp.add_argument("--full", action="store_true", help=f"use {FULL_REPLICATIONS} replications")
    sp.set_defaults(func=cmd_sample_sweep)

    sp = subs.add_parser("analyze", help="compare predictors on a raw data CSV")
    shared(sp)
    sp.set_defaults(out=None)
    sp.add_argument("data", help="n x p numeric CSV, optional header row")
    sp.add_argument("--q", type=positive_int, required=True)
    sp.add_argument("--rotation", choices=("varimax", "promax"), default="varimax")
    sp.set_defaults(func=cmd_analyze)

    sp = subs.add_parser("threshold", help="loading threshold for one set and p/q")
    shared(sp)
    sp.add_argument("--set", default="Set1", choices=[s.value for s in ModelSet])
    sp.add_argument("--q", type=positive_int, default=1)
    sp.add_argument("--per-factor", type=positive_int, default=3)
    sp.add_argument("--lo", type=float, default=0.25)
    sp.add_argument("--hi", type=float, default=None)
    sp.add_argument("--step", type=float, default=0.05)
    sp.set_defaults(func=cmd_threshold)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = parser._subparsers._group_actions[0].choices[args.command]
        apply_config(sub, args.config)
        args = parser.parse_args(argv)
    if args.command == "threshold" and args.hi is None:
        args.hi = ModelSet(args.set).max_loading
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (CovReproError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
