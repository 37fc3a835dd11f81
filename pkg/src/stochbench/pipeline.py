"""Pipeline stages: gen -> run -> profile -> strategies -> report.

Every stage reads its inputs from files written by the previous one, so each
number in the report can be traced to a stored artifact.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import cim, pt
from .config import RunConfig
from .instances import WishartSpec, atomic_write_text, generate_wishart, read_instance, write_instance
from .model import IsingInstance, ParameterPoint, SampleSet
from .profiles import (PerformanceProfile, ProfilePoint, ResourceGrid, aggregate_estimates, bootstrap_profile,
                       format_float, kcurves_to_csv, profiles_to_csv, read_profiles_csv)
from .search import DiscreteSpace
from .seeding import derived_int, substream
from .strategies import (EXPLORE_EXPLOIT, MetaParams, MetaSweepResult, ProfileEvaluator, StrategyCurve,
                         cross_validate, fixed_best, make_splits, meta_sweep, realized_profile, smooth_curve,
                         virtual_best)

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
FIXED_MODES = ("argmax-of-aggregate", "average-of-argmax")


class StageError(RuntimeError):
    """Bad pipeline state caused by configuration (exit code 2)."""


class MissingArtifactError(RuntimeError):
    """An upstream stage has not been run (exit code 3)."""


class SolverFailure(RuntimeError):
    """A solver raised while producing samples (exit code 4)."""


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"missing {path}; run `{stage}` first")
    return path


# -- gen -------------------------------------------------------------------

def cmd_gen(cfg: RunConfig, force: bool = False) -> list[Path]:
    if cfg.gen_n is None or cfg.gen_alpha is None or cfg.gen_count is None:
        raise StageError("gen needs gen.n, gen.alpha and gen.count")
    if cfg.gen_count < 1:
        raise StageError(f"gen.count must be >= 1, got {cfg.gen_count}")
    out = cfg.instances_dir
    if out.exists() and any(out.iterdir()):
        if not force:
            raise StageError(f"{out} is not empty; pass --force to overwrite")
        for old in list(out.glob("*.ising")) + list(out.glob("manifest.json")):
            old.unlink()
    spec = WishartSpec(cfg.gen_n, cfg.gen_alpha, cfg.seed, cfg.gen_count)
    try:
        instances = generate_wishart(spec)
    except ValueError as exc:
        raise StageError(str(exc)) from None
    paths = []
    entries = []
    for inst in instances:
        path = out / f"{inst.instance_id}.ising"
        write_instance(inst, path)
        paths.append(path)
        entries.append({"id": inst.instance_id, "file": path.name, "n": inst.n, "ground_energy": inst.ground_energy})
    manifest = {"generator": "wishart", "n": spec.n, "alpha": spec.alpha, "seed": spec.seed, "count": spec.count,
                "instances": entries}
    atomic_write_text(out / "manifest.json", _dump_json(manifest))
    return paths


def load_instances(cfg: RunConfig) -> dict[str, IsingInstance]:
    manifest = _require(cfg.instances_dir / "manifest.json", "gen")
    entries = json.loads(manifest.read_text())["instances"]
    out = {}
    for entry in entries:
        inst = read_instance(cfg.instances_dir / entry["file"])
        out[entry["id"]] = inst if inst.instance_id else inst.with_meta(id=entry["id"])
    return out


# -- run -------------------------------------------------------------------

def _points_to_json(points: Sequence[ParameterPoint]) -> list:
    return [{"key": p.key, "values": [[k, v] for k, v in p.values]} for p in points]


def _points_from_json(solver: str, items: list) -> list[ParameterPoint]:
    return [ParameterPoint(solver, tuple((k, float(v)) for k, v in item["values"])) for item in items]


def run_path(cfg: RunConfig, instance_id: str, point: ParameterPoint) -> Path:
    return cfg.output_dir / "runs" / instance_id / f"{point.key}.json"


def solve(solver: str, instance: IsingInstance, point: ParameterPoint, shots: int, seed: int,
          fixed: cim.CimFixedParams | None = None, clamp: bool = False) -> SampleSet:
    if solver == pt.SOLVER_ID:
        return pt.run_pt(instance, pt.PtParams.from_point(point), shots, seed, clamp=clamp)
    if solver == cim.SOLVER_ID:
        return cim.run_cim(instance, cim.CimParams.from_point(point), fixed or cim.CimFixedParams(), shots, seed)
    raise StageError(f"unknown solver {solver!r}; expected one of {{{pt.SOLVER_ID}, {cim.SOLVER_ID}}}")


def _run_job(job) -> str:
    solver, instance, point, shots, seed, fixed, clamp, path = job
    samples = solve(solver, instance, point, shots, seed, fixed, clamp)
    samples.instance_id = instance.instance_id
    samples.params = point
    atomic_write_text(path, json.dumps(samples.to_json(), sort_keys=True) + "\n")
    return str(path)


def _execute(cfg: RunConfig, instances: dict[str, IsingInstance], points: Iterable[ParameterPoint],
             force: bool, jobs: int) -> int:
    fixed = cfg.cim_fixed() if cfg.solver == cim.SOLVER_ID else None
    todo = []
    for inst_id in sorted(instances):
        for point in points:
            path = run_path(cfg, inst_id, point)
            if path.exists() and not force:
                continue
            seed = derived_int(cfg.seed, "run", inst_id, point.key)
            # drawn probabilities may fall outside the valid range; explicit ones must not
            todo.append((cfg.solver, instances[inst_id], point, cfg.shots, seed, fixed, cfg.is_random_search, path))
    try:
        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for _ in pool.map(_run_job, todo):
                    pass
        else:
            for job in todo:
                _run_job(job)
    except (StageError, MissingArtifactError):
        raise
    except Exception as exc:
        raise SolverFailure(f"{cfg.solver} failed: {exc}") from exc
    return len(todo)


def cmd_run(cfg: RunConfig, force: bool = False, jobs: int | None = None) -> int:
    """Run the solver over instance x parameter set; returns the number of new SampleSet files."""
    instances = load_instances(cfg)
    points = cfg.parameter_points()
    runs = cfg.output_dir / "runs"
    atomic_write_text(runs / "points.json", _dump_json({"solver": cfg.solver, "points": _points_to_json(points)}))
    return _execute(cfg, instances, points, force, jobs or cfg.jobs)


def load_points(cfg: RunConfig, name: str = "points.json") -> list[ParameterPoint]:
    path = _require(cfg.output_dir / "runs" / name, "run")
    obj = json.loads(path.read_text())
    return _points_from_json(obj["solver"], obj["points"])


def load_samples(cfg: RunConfig, instance_id: str, point: ParameterPoint) -> SampleSet:
    path = _require(run_path(cfg, instance_id, point), "run")
    return SampleSet.from_json(json.loads(path.read_text()))


# -- profile ---------------------------------------------------------------

def _resource_grid(cfg: RunConfig, pools: Sequence[SampleSet]) -> ResourceGrid:
    first = cfg.grid_min if cfg.grid_min is not None else min(p.mean_cost for p in pools)
    budget = min(p.total_resource for p in pools)
    last = cfg.grid_max if cfg.grid_max is not None else budget
    if last > budget:
        raise StageError(f"grid.max={last:g} exceeds the smallest pool budget {budget:g}")
    if first > last:
        raise StageError(f"grid.min={first:g} exceeds grid.max={last:g}")
    return ResourceGrid.logspace(first, last, cfg.grid_points)


def _bootstrap_all(cfg: RunConfig, instances, points, grid: ResourceGrid) -> list[PerformanceProfile]:
    out = []
    for inst_id in sorted(instances):
        for point in points:
            pool = load_samples(cfg, inst_id, point)
            out.append(bootstrap_profile(pool, grid, cfg.n_boot, cfg.confidence, instances[inst_id], cfg.seed))
    return out


def cmd_profile(cfg: RunConfig) -> Path:
    instances = load_instances(cfg)
    points = load_points(cfg)
    pools = [load_samples(cfg, i, p) for i in sorted(instances) for p in points]
    grid = _resource_grid(cfg, pools)
    profiles = _bootstrap_all(cfg, instances, points, grid)
    out = cfg.output_dir / "profiles"
    atomic_write_text(out / "grid.json", _dump_json({"resources": list(grid.values)}))
    atomic_write_text(out / "profiles.csv", profiles_to_csv(profiles))
    atomic_write_text(out / "kcurves.csv", kcurves_to_csv(profiles))
    return out


def load_grid(cfg: RunConfig) -> ResourceGrid:
    path = _require(cfg.output_dir / "profiles" / "grid.json", "profile")
    return ResourceGrid(tuple(json.loads(path.read_text())["resources"]))


def load_profiles(cfg: RunConfig, points: Sequence[ParameterPoint], prefix: str = "",
                  folder: str = "profiles") -> dict[str, list[PerformanceProfile]]:
    base = cfg.output_dir / folder
    text = _require(base / f"{prefix}profiles.csv", "profile").read_text()
    kc = _require(base / f"{prefix}kcurves.csv", "profile").read_text()
    by_key = {p.key: p for p in points}
    table: dict[str, list[PerformanceProfile]] = {}
    for prof in read_profiles_csv(text, by_key, kc):
        if prof.params is None:
            continue
        table.setdefault(prof.instance_id, []).append(prof)
    return table


# -- strategies ------------------------------------------------------------

@dataclass
class Derived:
    raw_fixed: dict[str, StrategyCurve]
    fixed: dict[str, StrategyCurve]
    sweep: MetaSweepResult

    @property
    def meta(self) -> StrategyCurve:
        return self.sweep.actionable


def _strategy_name(mode: str) -> str:
    return f"fixed:{mode}"


def _curve_rows(name: str, curve: StrategyCurve, names: Sequence[str], est=None, lo=None, hi=None) -> list[list]:
    rows = []
    for c, p in enumerate(curve.points):
        e = p.score if est is None else est[c]
        rows.append([name, format_float(p.resource), *[format_float(p.params[n]) for n in names], format_float(e),
                     format_float(math.nan if lo is None else lo[c]), format_float(math.nan if hi is None else hi[c]),
                     int(p.needs_rerun)])
    return rows


def _write_csv(path: Path, header: list[str], rows: Iterable[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


class StrategyContext:
    """Profiles for the evaluated set plus reruns, indexed by instance and point."""

    def __init__(self, cfg: RunConfig, base: dict[str, list[PerformanceProfile]], grid: ResourceGrid):
        self.cfg = cfg
        self.base = base
        self.grid = np.asarray(grid.values)
        self.all = {i: {p.params: p for p in profs} for i, profs in base.items()}
        self.base_points = sorted({p.params for profs in base.values() for p in profs}, key=lambda p: p.vector)

    def add(self, profiles: Iterable[PerformanceProfile]) -> None:
        for prof in profiles:
            self.all[prof.instance_id][prof.params] = prof

    def space(self, inst: str) -> DiscreteSpace:
        return DiscreteSpace(self.base_points)

    def evaluator(self, inst: str) -> ProfileEvaluator:
        return ProfileEvaluator(self.base[inst], self.space(inst))

    def derive(self, train_ids: Sequence[str]) -> Derived:
        cfg = self.cfg
        train = {i: self.base[i] for i in train_ids}
        raw, fixed = {}, {}
        for mode in FIXED_MODES:
            raw[mode] = fixed_best(train, mode, cfg.integer_params)
            window = min(cfg.smooth_window, _odd(len(raw[mode].points)))
            fixed[mode] = smooth_curve(raw[mode], window, cfg.smooth_fit, evaluated=self.base_points,
                                       integer_params=cfg.integer_params)
        sweep = meta_sweep(cfg.meta_grid(), self.grid, sorted(train_ids), self.space, self.evaluator,
                           cfg.meta_n_rep, cfg.seed, cfg.smooth_window)
        return Derived(raw, fixed, sweep)

    def vb_row(self, inst: str) -> np.ndarray:
        profs = sorted(self.all[inst].values(), key=lambda p: p.params.vector)
        est = np.array([p.estimates for p in profs])
        best = np.argmax(est, axis=0)
        cols = np.arange(self.grid.size)
        lows = np.array([p.ci[0] for p in profs])
        highs = np.array([p.ci[1] for p in profs])
        return np.array([est[best, cols], lows[best, cols], highs[best, cols]])

    def curve_row(self, inst: str, curve: StrategyCurve) -> np.ndarray:
        out = np.empty((3, self.grid.size))
        for c, point in enumerate(curve.points):
            prof = self.all[inst][point.params]
            pp = prof.points[c]
            out[:, c] = pp.estimate, pp.ci_low, pp.ci_high
        return out

    def evaluate(self, derived: Derived, test_ids: Sequence[str]) -> dict[str, dict[str, np.ndarray]]:
        cfg = self.cfg
        results: dict[str, dict[str, np.ndarray]] = {"virtual-best": {}, EXPLORE_EXPLOIT: {}}
        for mode in FIXED_MODES:
            results[_strategy_name(mode)] = {}
        meta_at = {p.resource: MetaParams.from_point(p.params) for p in derived.meta.points}
        for inst in test_ids:
            results["virtual-best"][inst] = self.vb_row(inst)
            for mode in FIXED_MODES:
                results[_strategy_name(mode)][inst] = self.curve_row(inst, derived.fixed[mode])
            results[EXPLORE_EXPLOIT][inst] = realized_profile(
                self.grid, lambda B: meta_at[B], self.space(inst), self.evaluator(inst), cfg.seed,
                f"test:{inst}", cfg.meta_n_rep, cfg.confidence)
        return results


def _odd(n: int) -> int:
    return n if n % 2 else max(1, n - 1)


def _rerun(cfg: RunConfig, ctx: StrategyContext, instances, points: list[ParameterPoint], grid: ResourceGrid,
           force: bool, jobs: int) -> None:
    runs = cfg.output_dir / "runs"
    atomic_write_text(runs / "reruns.json", _dump_json({"solver": cfg.solver, "points": _points_to_json(points)}))
    if not points:
        profiles = []
    else:
        _execute(cfg, instances, points, force, jobs)
        profiles = _bootstrap_all(cfg, instances, points, grid)
    out = cfg.output_dir / "strategies"
    atomic_write_text(out / "rerun_profiles.csv", profiles_to_csv(profiles))
    atomic_write_text(out / "rerun_kcurves.csv", kcurves_to_csv(profiles))
    ctx.add(profiles)


def cmd_strategies(cfg: RunConfig, force: bool = False, jobs: int | None = None) -> Path:
    instances = load_instances(cfg)
    points = load_points(cfg)
    grid = load_grid(cfg)
    base = load_profiles(cfg, points)
    ctx = StrategyContext(cfg, base, grid)
    ids = sorted(base)
    out = cfg.output_dir / "strategies"
    names = list(cfg.param_names)

    full = ctx.derive(ids)
    sweep = full.sweep

    # derive on every split first so all reruns happen in one batch
    derived = {}

    def derive(train_ids):
        key = tuple(train_ids)
        if key not in derived:
            derived[key] = ctx.derive(train_ids)
        return derived[key]

    splits = make_splits(ids, cfg.n_splits, cfg.train_frac, cfg.seed)
    for split in splits:
        derive(split.train_ids)
    rerun_points = {}
    for d in [full, *derived.values()]:
        for curve in d.fixed.values():
            for p in curve.needs_rerun:
                rerun_points.setdefault(p, None)
    rerun_list = sorted(rerun_points, key=lambda p: p.vector)
    _rerun(cfg, ctx, instances, rerun_list, grid, force, jobs or cfg.jobs)

    cv = cross_validate(ids, derive, ctx.evaluate, ctx.grid, cfg.n_splits, cfg.train_frac, cfg.seed)

    # the oracle ranges over every point with a profile, reruns included
    everything = {i: list(ctx.all[i].values()) for i in ids}
    vb_curves, vb_profiles, _ = virtual_best(everything, cfg.n_boot, cfg.confidence, cfg.statistic, cfg.seed)

    header = ["strategy", "resource", *[f"param:{n}" for n in names], "estimate", "ci_low", "ci_high", "needs_rerun"]
    rows = []
    for inst in ids:
        vb = vb_profiles[inst]
        rows += _curve_rows(f"virtual-best:{inst}", vb_curves[inst], names, vb.estimates, *vb.ci)
    _write_csv(out / "vb_parameters.csv", header, rows)

    rows = []
    for mode in FIXED_MODES:
        rows += _curve_rows(f"fixed:{mode}:raw", full.raw_fixed[mode], names)
        agg = _aggregate_rows([ctx.curve_row(i, full.fixed[mode]) for i in ids], cfg, f"fixed:{mode}")
        rows += _curve_rows(f"fixed:{mode}", full.fixed[mode], names, *agg)
    _write_csv(out / "fixed.csv", header, rows)

    meta_header = ["curve", "resource", "explore_frac", "tau", "estimate"]
    rows = []
    for curve in (sweep.best_found, sweep.actionable):
        for p in curve.points:
            rows.append([curve.label, format_float(p.resource), format_float(p.params["explore_frac"]),
                         format_float(p.params["tau"]), format_float(p.score)])
    _write_csv(out / "meta.csv", meta_header, rows)
    rows = [["cell", format_float(B), format_float(m.explore_frac), format_float(m.tau),
             format_float(sweep.mean_scores[mi, c])]
            for mi, m in enumerate(sweep.meta_points) for c, B in enumerate(sweep.budgets)]
    _write_csv(out / "meta_table.csv", meta_header, rows)

    split_info = [{"split": s.split_id, "train": list(s.train_ids), "test": list(s.test_ids)} for s in cv.splits]
    atomic_write_text(out / "splits.json", _dump_json({"seed": cfg.seed, "train_frac": cfg.train_frac,
                                                        "splits": split_info}))
    rows = []
    for name in sorted(cv.rows):
        for split_id, inst, arr in cv.rows[name]:
            for c, r in enumerate(ctx.grid):
                rows.append([split_id, inst, name, format_float(r), format_float(arr[0, c]),
                             format_float(arr[1, c]), format_float(arr[2, c])])
    _write_csv(out / "cv_rows.csv", ["split", "instance_id", "strategy", "resource", "estimate", "ci_low", "ci_high"],
               rows)
    return out


def _aggregate_rows(rows: list[np.ndarray], cfg: RunConfig, label: str):
    arr = np.array(rows)
    return aggregate_estimates(arr[:, 0], arr[:, 1], arr[:, 2], cfg.statistic, cfg.n_boot, cfg.confidence,
                               substream(cfg.seed, "strategy-aggregate", label))


# -- report ----------------------------------------------------------------

def read_cv_rows(path: Path) -> dict[str, list[tuple[int, str, np.ndarray]]]:
    grouped: dict[tuple[str, int, str], list] = {}
    for row in csv.DictReader(io.StringIO(path.read_text())):
        key = (row["strategy"], int(row["split"]), row["instance_id"])
        grouped.setdefault(key, []).append([float(row["resource"]), float(row["estimate"]), float(row["ci_low"]),
                                            float(row["ci_high"])])
    out: dict[str, list] = {}
    for (name, split, inst), vals in grouped.items():
        arr = np.array(vals)
        out.setdefault(name, []).append((split, inst, arr.T))
    return out


def cmd_report(cfg: RunConfig) -> Path:
    _require(cfg.output_dir / "profiles" / "profiles.csv", "profile")
    src = cfg.output_dir / "strategies"
    for name in ("cv_rows.csv", "fixed.csv", "meta.csv", "vb_parameters.csv"):
        _require(src / name, "strategies")
    out = cfg.output_dir / "report"
    if out.exists():
        shutil.rmtree(out)
    out.mkdir(parents=True)

    cv = read_cv_rows(src / "cv_rows.csv")
    rows = []
    for name in sorted(cv):
        entries = sorted(cv[name], key=lambda t: (t[0], t[1]))
        arr = np.array([e[2] for e in entries])
        resources = arr[0, 0]
        est, lo, hi = aggregate_estimates(arr[:, 1], arr[:, 2], arr[:, 3], cfg.statistic, cfg.n_boot,
                                          cfg.confidence, substream(cfg.seed, "cv-aggregate", name))
        for c, r in enumerate(resources):
            rows.append([cfg.solver, name, format_float(r), format_float(est[c]), format_float(lo[c]),
                         format_float(hi[c]), len(entries)])
    _write_csv(out / "performance_profiles.csv",
               ["solver", "strategy", "resource", "estimate", "ci_low", "ci_high", "n_rows"], rows)
    shutil.copyfile(src / "fixed.csv", out / "parameter_strategies.csv")
    shutil.copyfile(src / "vb_parameters.csv", out / "vb_parameters.csv")
    shutil.copyfile(src / "meta.csv", out / "meta_strategies.csv")

    manifest = json.loads(_require(cfg.instances_dir / "manifest.json", "gen").read_text())
    files = {
        "performance_profiles": "performance_profiles.csv",
        "parameter_strategies": "parameter_strategies.csv",
        "vb_parameters": "vb_parameters.csv",
        "meta_strategies": "meta_strategies.csv",
    }
    index = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "solver": cfg.solver,
        "n": manifest.get("n"),
        "alpha": manifest.get("alpha"),
        "instances": len(manifest["instances"]),
        "seed": cfg.seed,
        "statistic": cfg.statistic,
        "n_splits": cfg.n_splits,
        "train_frac": cfg.train_frac,
        "strategies": sorted(cv),
        "files": files,
    }
    atomic_write_text(out / "index.json", _dump_json(index))
    if cfg.scaling_dirs:
        # written after the index so this run can appear in its own table
        _write_csv(out / "scaling.csv", SCALING_HEADER, scaling_rows(cfg.scaling_dirs, cfg.scaling_resource))
        files["scaling"] = "scaling.csv"
        atomic_write_text(out / "index.json", _dump_json(index))
    return out


SCALING_HEADER = ["solver", "strategy", "n", "resource", "estimate", "ci_low", "ci_high"]


def scaling_rows(dirs: Sequence[Path], resource: float | None) -> list[list]:
    """Score at a fixed resource per (solver, strategy, size), read from finished reports.

    Uses the largest grid resource not above ``resource`` (the smallest grid
    point if all exceed it; the largest if ``resource`` is unset).
    """
    rows = []
    for d in dirs:
        report = Path(d) / "report"
        index = json.loads(_require(report / "index.json", "report").read_text())
        by_strategy: dict[str, list[dict]] = {}
        for row in csv.DictReader(io.StringIO((report / index["files"]["performance_profiles"]).read_text())):
            by_strategy.setdefault(row["strategy"], []).append(row)
        for name, items in by_strategy.items():
            items.sort(key=lambda r: float(r["resource"]))
            chosen = items[-1]
            if resource is not None:
                below = [r for r in items if float(r["resource"]) <= resource]
                chosen = below[-1] if below else items[0]
            rows.append([index["solver"], name, index["n"], chosen["resource"], chosen["estimate"],
                         chosen["ci_low"], chosen["ci_high"]])
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows
