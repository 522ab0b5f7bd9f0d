"""Scenario files: parsing, validation, task execution and reports.

A scenario file is JSON holding either one scenario object or
``{"scenarios": [...]}``.  A scenario object has the keys

``id``        unique string
``root``      root description (see :func:`proxcycles.roots.root_from_dict`)
``function``  function description (see :func:`proxcycles.functions.function_from_dict`)
``tasks``     ordered subset of :data:`TASKS` (default: all)
``solver``    :class:`~proxcycles.solvers.SolverConfig` overrides
``seed``      integer for randomised sampling (default 0)
``tol``       pass/fail threshold for residual suites (default 1e-6)
``z0``        starting point of the fixed-point searches (default 0)
``expect``    optional oracle values: ``d``, ``e``, ``gap`` (vectors),
              ``find_cycle`` (expected status) and ``isometric`` (bool)

Reports are plain dicts that serialise deterministically; only
``wall_time_ms`` varies between identical runs.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import cycles
from .errors import NumericError, ProxCycleError, UnsupportedError
from .functions import ConvexFunction, function_from_dict
from .roots import RootOperator, is_isometry, root_from_dict, verify_root
from .simons import build, identity_failures, verify_identities
from .solvers import SolverConfig

TASKS = ("verify_ops", "find_cycle", "solve_ed", "find_phantom", "characterize", "attouch_thera")
DEFAULT_TOL = 1e-6
PASS = "Pass"
FAIL = "Fail"
KNOWN_KEYS = {"id", "root", "function", "tasks", "solver", "seed", "tol", "z0", "expect"}


class ScenarioError(ProxCycleError, ValueError):
    """A scenario file could not be parsed or validated.

    ``line`` is the 1-based line of the offending entry when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


@dataclass
class Scenario:
    id: str
    root: RootOperator
    function: ConvexFunction
    tasks: tuple = TASKS
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    tol: float = DEFAULT_TOL
    z0: np.ndarray | None = None
    expect: dict = field(default_factory=dict)


def _line_of(text, needle, start=0):
    if text is None:
        return None
    pos = text.find(needle, start)
    return None if pos < 0 else text.count("\n", 0, pos) + 1


def scenario_from_dict(data: dict, path=None, text=None) -> Scenario:
    """Validate one scenario object; errors carry the line of its ``id``."""
    if not isinstance(data, dict):
        raise ScenarioError("a scenario must be a JSON object", path)
    sid = data.get("id")
    line = _line_of(text, json.dumps(sid)) if isinstance(sid, str) else None
    if not isinstance(sid, str) or not sid:
        raise ScenarioError("scenario is missing a non-empty string 'id'", path, line)

    def fail(msg):
        return ScenarioError(f"scenario {sid!r}: {msg}", path, line)

    unknown = set(data) - KNOWN_KEYS
    if unknown:
        raise fail(f"unknown keys {sorted(unknown)}")
    for key in ("root", "function"):
        if key not in data:
            raise fail(f"missing {key!r}")
    try:
        root = root_from_dict(data["root"])
    except (ValueError, KeyError, TypeError) as exc:
        raise fail(f"bad root: {exc}") from None
    try:
        func = function_from_dict(data["function"])
    except (ValueError, KeyError, TypeError) as exc:
        raise fail(f"bad function: {exc}") from None
    if func.dim != root.dim:
        raise fail(f"function dimension {func.dim} does not match root dimension {root.dim}")
    tasks = data.get("tasks", list(TASKS))
    if not isinstance(tasks, list) or not all(isinstance(t, str) for t in tasks):
        raise fail("'tasks' must be a list of task names")
    bad = [t for t in tasks if t not in TASKS]
    if bad:
        raise fail(f"unknown tasks {bad}; known: {list(TASKS)}")
    try:
        solver = SolverConfig.from_dict(data.get("solver"))
    except (ValueError, TypeError) as exc:
        raise fail(f"bad solver config: {exc}") from None
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise fail("'seed' must be an integer")
    tol = data.get("tol", DEFAULT_TOL)
    if not isinstance(tol, (int, float)) or not tol > 0:
        raise fail("'tol' must be a positive number")
    z0 = data.get("z0")
    if z0 is not None:
        z0 = np.asarray(z0, dtype=float)
        if z0.shape != (root.dim,):
            raise fail(f"'z0' must have length {root.dim}")
    expect = data.get("expect", {})
    if not isinstance(expect, dict):
        raise fail("'expect' must be an object")
    for key in ("d", "e", "gap"):
        if key in expect and len(expect[key]) != root.dim:
            raise fail(f"expect.{key} must have length {root.dim}")
    return Scenario(id=sid, root=root, function=func, tasks=tuple(tasks), solver=solver,
                    seed=seed, tol=float(tol), z0=z0, expect=dict(expect))


def parse_scenarios(text: str, path=None) -> list[Scenario]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg} (column {exc.colno})", path, exc.lineno) from None
    items = data["scenarios"] if isinstance(data, dict) and "scenarios" in data else [data]
    if not isinstance(items, list) or not items:
        raise ScenarioError("'scenarios' must be a non-empty list", path, 1)
    out = []
    seen = set()
    for item in items:
        sc = scenario_from_dict(item, path, text)
        if sc.id in seen:
            raise ScenarioError(f"duplicate scenario id {sc.id!r}", path,
                                _line_of(text, json.dumps(sc.id), text.find(json.dumps(sc.id)) + 1))
        seen.add(sc.id)
        out.append(sc)
    return out


def load_scenarios(path) -> list[Scenario]:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc.strerror}", path) from None
    return parse_scenarios(text, path)


# --- running -----------------------------------------------------------------

def _max_residual(res: dict) -> float:
    vals = [float(v) for v in res.values() if isinstance(v, (int, float)) and not isinstance(v, bool)]
    return max(vals) if vals else 0.0


class _Run:
    """State shared by the tasks of one scenario."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.ops = None
        self.cycle = None
        self.ed = None
        self.phantom = None
        self.traces = {}

    def operators(self):
        if self.ops is None:
            self.ops = build(self.sc.root)
        return self.ops

    def need_ed(self):
        if self.ed is None:
            self.ed = cycles.solve_ed(self.sc.function, self.operators(), self.sc.solver, rng=self.sc.seed)
            self.traces["solve_ed"] = self.ed.trace
        return self.ed

    def need_cycle(self):
        if self.cycle is None:
            self.cycle = cycles.find_cycle(self.sc.function, self.operators(), self.sc.z0, self.sc.solver)
            self.traces["find_cycle"] = self.cycle.trace
        return self.cycle


def _vec_check(name, value, expect, out):
    if name in expect:
        out[f"expected_{name}"] = float(np.linalg.norm(np.asarray(value) - np.asarray(expect[name], dtype=float)))


def _task_verify_ops(run: _Run):
    sc = run.sc
    ok, resid = verify_root(sc.root)
    iso, witness = is_isometry(sc.root)
    info = {"root_residual": resid, "isometric": iso}
    res = {"root_residual": resid}
    passed = ok
    if witness is not None:
        info["witness"] = witness.tolist()
        info["witness_norm"] = float(np.linalg.norm(sc.root.matrix @ witness))
    if ok:
        ops = run.operators()
        report = verify_identities(ops, samples=50, rng=sc.seed)
        fails = identity_failures(report, ops.isometric)
        res.update({k: v for k, v in report.items() if ops.isometric or k not in ("isometry_trick", "skew_Q0")})
        info["identity_failures"] = fails
        passed = passed and not fails
        if ops.isometric:
            A = ops.A
            res["A_symmetric"] = float(np.linalg.norm(A - A.T))
            res["A_idempotent"] = float(np.linalg.norm(A @ A - A))
    if "isometric" in sc.expect:
        passed = passed and iso == bool(sc.expect["isometric"])
    # identities are algebraic: judged at their own tolerance, not the scenario's
    return passed, res, info, 0


def _task_find_cycle(run: _Run):
    sc = run.sc
    c = run.need_cycle()
    want = sc.expect.get("find_cycle", cycles.CONVERGED)
    res = {}
    info = {"cycle_status": c.status, "z": c.z.tolist(), "gap": c.gap.tolist()}
    passed = c.status == want
    if c.status == cycles.CONVERGED:
        res["fixed_point"] = c.characterization["fixed_point"]
        _vec_check("gap", c.gap, sc.expect, res)
        _vec_check("d", c.gap, sc.expect, res)
        passed = passed and _max_residual(res) <= sc.tol
    else:
        info["tail_min_residual"] = c.characterization["tail_min_residual"]
    return passed, res, info, c.trace.iterations


def _task_solve_ed(run: _Run):
    sc = run.sc
    ed = run.need_ed()
    res = {k: v for k, v in ed.residuals.items() if k != "conjugate_at_d"}
    _vec_check("d", ed.d, sc.expect, res)
    _vec_check("e", ed.e, sc.expect, res)
    info = {"d": ed.d.tolist(), "e": ed.e.tolist(), "conjugate_at_d": ed.residuals["conjugate_at_d"]}
    return _max_residual(res) <= sc.tol, res, info, ed.trace.iterations


def _task_find_phantom(run: _Run):
    sc = run.sc
    ph = cycles.find_phantom(sc.function, run.operators(), sc.solver, sc.z0, ed=run.ed)
    run.phantom = ph
    run.traces["find_phantom"] = ph.trace
    trans = cycles.phantom_translate_residuals(sc.function, run.operators(), ph, samples=10,
                                               rng=sc.seed, cfg=sc.solver)
    res = {
        "cross_check_e": ph.cross_check["e"],
        "cross_check_d": ph.cross_check["d"],
        "fixed_point": ph.cross_check["fixed_point"],
        "translates": float(trans.max()) if trans.size else 0.0,
    }
    _vec_check("d", ph.ed.d, sc.expect, res)
    _vec_check("e", ph.ed.e, sc.expect, res)
    info = {"z": ph.z.tolist(), "d": ph.ed.d.tolist(), "e": ph.ed.e.tolist(),
            "converged": ph.converged, "d_norm": float(np.linalg.norm(ph.ed.d))}
    return ph.converged and _max_residual(res) <= sc.tol, res, info, ph.trace.iterations


def _task_characterize(run: _Run):
    sc = run.sc
    c = run.need_cycle()
    if c.status != cycles.CONVERGED:
        return False, {}, {"reason": f"no converged cycle ({c.status})"}, 0
    res = cycles.check_cycle_characterization(sc.function, run.operators(), c.z, run.need_ed())
    return _max_residual(res) <= sc.tol, res, {}, 0


def _task_attouch_thera(run: _Run):
    sc = run.sc
    res = cycles.verify_attouch_thera(sc.function, run.operators(), run.need_ed(), sc.solver)
    return _max_residual(res) <= sc.tol, res, {}, 0


_TASK_FUNCS = {
    "verify_ops": _task_verify_ops,
    "find_cycle": _task_find_cycle,
    "solve_ed": _task_solve_ed,
    "find_phantom": _task_find_phantom,
    "characterize": _task_characterize,
    "attouch_thera": _task_attouch_thera,
}


def run_scenario(sc: Scenario) -> tuple[dict, dict]:
    """Execute the scenario's tasks in order.

    Returns ``(report, traces)``; ``traces`` maps task names to
    :class:`~proxcycles.solvers.SolveTrace` objects for CSV export.
    Numerical failures are caught per task and recorded as ``Fail`` with
    the error message.
    """
    run = _Run(sc)
    t0 = time.perf_counter()
    tasks = {}
    residuals = {}
    total_iter = 0
    for name in sc.tasks:
        try:
            passed, res, info, iters = _TASK_FUNCS[name](run)
        except UnsupportedError as exc:
            passed, res, info, iters = False, {}, {"error": f"unsupported: {exc}"}, 0
        except (NumericError, ProxCycleError, ValueError, ArithmeticError) as exc:
            passed, res, info, iters = False, {}, {"error": f"{type(exc).__name__}: {exc}"}, 0
        entry = {"status": PASS if passed else FAIL, "iterations": int(iters),
                 "max_residual": _max_residual(res)}
        entry.update(info)
        tasks[name] = entry
        residuals[name] = res
        total_iter += int(iters)
    report = {
        "scenario_id": sc.id,
        "status": PASS if all(t["status"] == PASS for t in tasks.values()) else FAIL,
        "z": _pick_z(run),
        "d": None if run.ed is None and run.phantom is None else _pick(run, "d"),
        "e": None if run.ed is None and run.phantom is None else _pick(run, "e"),
        "residuals": residuals,
        "iterations": total_iter,
        "wall_time_ms": round(1000.0 * (time.perf_counter() - t0), 3),
        "tasks": tasks,
        "tol": sc.tol,
        "seed": sc.seed,
    }
    return report, dict(run.traces)


def _pick_z(run):
    if run.cycle is not None and run.cycle.status == cycles.CONVERGED:
        return run.cycle.z.tolist()
    if run.phantom is not None:
        return run.phantom.z.tolist()
    return None


def _pick(run, key):
    src = run.ed if run.ed is not None else run.phantom.ed
    return getattr(src, key).tolist()


# --- serialisation -------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def report_json(report: dict) -> str:
    """Deterministic JSON text (sorted keys, non-finite floats as strings)."""
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def write_reports(reports: list[dict], traces: list[dict], outdir) -> list[str]:
    """Write ``<id>.json`` per scenario, ``<id>_<task>_trace.csv`` and ``aggregate.csv``."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    rows = []
    for rep, tr in zip(reports, traces):
        sid = rep["scenario_id"]
        path = os.path.join(outdir, f"{sid}.json")
        with open(path, "w") as fh:
            fh.write(report_json(rep))
        written.append(path)
        for task, trace in sorted(tr.items()):
            tpath = os.path.join(outdir, f"{sid}_{task}_trace.csv")
            trace.to_csv(tpath)
            written.append(tpath)
        for task, entry in rep["tasks"].items():
            rows.append([sid, task, entry["status"], repr(float(entry["max_residual"])), entry["iterations"]])
    agg = os.path.join(outdir, "aggregate.csv")
    with open(agg, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario_id", "task", "status", "max_residual", "iterations"])
        writer.writerows(rows)
    written.append(agg)
    return written
