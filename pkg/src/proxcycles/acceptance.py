"""The built-in acceptance suite.

Each criterion is a function ``(seed, tol) -> CriterionResult``.  ``tol``,
when given, loosens every threshold of the criterion to at least ``tol``;
``seed`` drives all random sampling.  :func:`run_all` evaluates the
whole list in order and :func:`format_table` renders the results.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import catalog
from .cycles import (CONVERGED, NO_CYCLE, check_cycle_characterization, find_cycle,
                     find_phantom, phantom_translate_residuals, solve_ed, verify_attouch_thera)
from .functions import (INF, DecomposableSum, IndicatorBall, IndicatorBox, IndicatorHalfspace,
                        IndicatorHyperplane, IndicatorSingleton, LinearFn, NormL1, NormL2,
                        Quadratic, SquaredNorm, function_from_dict, is_translation_invariant)
from .roots import fixture, is_isometry, random_isometric_root, root_from_dict, verify_root
from .simons import build, verify_identities
from .solvers import SolverConfig


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    limit: float

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"[{verdict}] {self.number}. {self.name}: {self.detail} "
                f"({self.seconds:.2f} s, limit {self.limit:g} s)")


def _thr(value, tol):
    return value if tol is None else max(value, tol)


def _finish(number, name, limit, t0, checks):
    """``checks`` is a list of ``(ok, text)``."""
    seconds = time.perf_counter() - t0
    ok = all(c for c, _ in checks) and seconds < limit
    failed = [t for c, t in checks if not c]
    detail = "; ".join(failed) if failed else "; ".join(t for _, t in checks)
    if seconds >= limit:
        detail += f"; runtime {seconds:.1f} s over limit"
    return CriterionResult(number, name, ok, detail, seconds, limit)


def _scenario(sid):
    sc = catalog.get(sid)
    return (root_from_dict(sc["root"]), function_from_dict(sc["function"]),
            SolverConfig.from_dict(sc.get("solver")), sc)


def _random_roots(seed, count=50):
    rng = np.random.default_rng(seed)
    roots = []
    for _ in range(count):
        n = int(rng.integers(1, 17))
        m = int(rng.integers(1, 9))
        roots.append(random_isometric_root(rng, n, m))
    return roots


def criterion_fixtures(seed=0, tol=None):
    t0 = time.perf_counter()
    checks = []
    expected = {"B1": (5, math.sqrt(2.0)), "B2": (2, math.sqrt(20.0)), "B3": (3, math.sqrt(20.0))}
    for name, (order, wnorm) in expected.items():
        R = fixture(name)
        ok, resid = verify_root(R, _thr(1e-10, tol))
        checks.append((ok and R.order == order, f"{name}^{order} = Id (residual {resid:.1e})"))
        iso, w = is_isometry(R)
        got = float(np.linalg.norm(R.matrix @ w)) if w is not None else 0.0
        rel = abs(got - wnorm) / wnorm
        checks.append((not iso and rel <= _thr(1e-12, tol), f"{name} not isometric, |R w| = {got:.12g}"))
    return _finish(1, "non-isometric root fixtures", 1.0, t0, checks)


def criterion_identities(seed=0, tol=None):
    t0 = time.perf_counter()
    worst = {}
    for R in _random_roots(seed):
        rep = verify_identities(build(R), samples=20, rng=seed)
        for k, v in rep.items():
            worst[k] = max(worst.get(k, 0.0), v)
    thr = _thr(1e-10, tol)
    checks = [(v <= thr, f"{k} {v:.1e}") for k, v in worst.items()]
    return _finish(2, "average/displacement identities on random isometric roots", 10.0, t0, checks)


def criterion_projector(seed=0, tol=None):
    t0 = time.perf_counter()
    sym = idem = lsq = 0.0
    for R in _random_roots(seed):
        A = build(R).A
        sym = max(sym, float(np.linalg.norm(A - A.T)))
        idem = max(idem, float(np.linalg.norm(A @ A - A)))
        _, sv, vt = scipy.linalg.svd(np.eye(R.dim) - R.matrix)
        N = vt[sv <= 1e-8].T  # absolute cut: Id - R may vanish altogether
        P = N @ np.linalg.lstsq(N, np.eye(R.dim), rcond=None)[0]
        lsq = max(lsq, float(np.abs(A - P).max()))
    A2 = build(fixture("B2")).A
    reference = np.array([[1, 0.5, 0.5, 0.5], [0, 0, -1, -1.5], [0, 0, 1, 1.5], [0, 0, 0, 0]])
    ae4 = float(np.linalg.norm(A2[:, 3]))
    checks = [
        (sym <= _thr(1e-10, tol), f"|A - A^T| {sym:.1e}"),
        (idem <= _thr(1e-10, tol), f"|A^2 - A| {idem:.1e}"),
        (lsq <= _thr(1e-8, tol), f"A vs least-squares projector {lsq:.1e}"),
        (np.array_equal(A2, reference) if tol is None else np.abs(A2 - reference).max() <= tol,
         "B2 average matches the reference matrix"),
        (abs(ae4 - math.sqrt(19 / 4)) <= _thr(1e-12, tol), f"|A e4| = {ae4:.15g}"),
    ]
    return _finish(3, "average is the projector onto Fix R (and fails without isometry)", 10.0, t0, checks)


def criterion_ed_pair(seed=0, tol=None):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    checks = []
    for sid in catalog.REGULAR:
        R, f, cfg, _ = _scenario(sid)
        ops = build(R)
        eds = [solve_ed(f, ops, cfg, x0=3.0 * rng.standard_normal(R.dim), samples=0) for _ in range(10)]
        spread = max(max(np.abs(x.d - eds[0].d).max(), np.abs(x.e - eds[0].e).max()) for x in eds)
        cons = max(max(x.residuals["Se_minus_d"], x.residuals["Qd_minus_e"]) for x in eds)
        at = verify_attouch_thera(f, ops, eds[0], cfg)
        incl = max(at.values())
        ok = (spread <= _thr(1e-6, tol) and cons <= _thr(1e-8, tol) and incl <= _thr(1e-6, tol))
        checks.append((ok, f"{sid}: spread {spread:.0e}, consistency {cons:.0e}, inclusions {incl:.0e}"))
    return _finish(4, "unique (e, d) pair with primal and dual inclusions", 60.0, t0, checks)


def criterion_two_lines(seed=0, tol=None):
    t0 = time.perf_counter()
    R, f, cfg, sc = _scenario("two_lines")
    c = find_cycle(f, R, cfg=cfg)
    gap_err = float(np.abs(c.gap - np.array(sc["expect"]["d"])).max())
    ed = solve_ed(f, R, cfg)
    ch = check_cycle_characterization(f, R, c.z, ed)
    checks = [
        (c.status == CONVERGED, f"status {c.status}"),
        (gap_err <= _thr(1e-8, tol), f"gap error {gap_err:.1e}"),
        (max(ch.values()) <= _thr(1e-6, tol), "characterization " + ", ".join(f"{k} {v:.0e}" for k, v in ch.items())),
    ]
    return _finish(5, "two-lines cycle, gap vector and equivalent characterizations", 5.0, t0, checks)


def criterion_phantom(seed=0, tol=None):
    t0 = time.perf_counter()
    checks = []
    for sid in ("two_singletons", "two_lines"):
        R, f, cfg, _ = _scenario(sid)
        ops = build(R)
        ed = solve_ed(f, ops, cfg)
        ph = find_phantom(f, ops, cfg, ed=ed)
        tr = phantom_translate_residuals(f, ops, ph, samples=10, rng=seed, cfg=cfg)
        e_err = float(np.abs(ph.ed.e - ed.e).max())
        checks.append((ph.converged and tr.max() <= _thr(1e-5, tol) and e_err <= _thr(1e-6, tol),
                       f"{sid}: translates {tr.max():.0e}, |e' - e| {e_err:.0e}"))
    return _finish(6, "phantom cycle set is e + Fix R", 30.0, t0, checks)


def criterion_unattained(seed=0, tol=None):
    t0 = time.perf_counter()
    R, f, cfg, _ = _scenario("unattained_gap")
    c = find_cycle(f, R, cfg=SolverConfig(max_iter=cfg.max_iter))
    ph = find_phantom(f, R, cfg)
    dn = float(np.linalg.norm(ph.ed.d))
    checks = [
        (c.status == NO_CYCLE, f"classical status {c.status} after {c.trace.iterations} iterations"),
        (ph.converged and dn <= _thr(1e-4, tol), f"phantom |d| = {dn:.1e}"),
    ]
    return _finish(7, "unattained gap: no classical cycle, vanishing phantom gap", 60.0, t0, checks)


# --- convex-analysis property suites --------------------------------------------
# Closed-form proximal maps of the conjugates, written independently of the
# Moreau-based prox_conjugate of the library.

def _conj_prox_oracle(f, x, t):
    """``prox_{t f^*}(x)`` in closed form."""
    if isinstance(f, IndicatorBall):
        # f^* = <c, .> + r|.|: shift then shrink the norm
        v = x - t * f.center
        nv = np.linalg.norm(v)
        return np.zeros_like(v) if nv <= t * f.radius else (1 - t * f.radius / nv) * v
    if isinstance(f, IndicatorSingleton):
        return x - t * f.point
    if isinstance(f, IndicatorBox):
        # f^*(y) = sum max(y_i hi_i, y_i lo_i); scalar piecewise-linear prox
        lo, hi = f.lo, f.hi
        return np.where(x > t * hi, x - t * hi, np.where(x < t * lo, x - t * lo, 0.0))
    if isinstance(f, NormL1):
        return np.clip(x, -1.0, 1.0)
    if isinstance(f, NormL2):
        nx = np.linalg.norm(x)
        return x if nx <= 1 else x / nx
    if isinstance(f, SquaredNorm):
        # f = (w/2)|.|^2, f^* = |.|^2/(2w)
        return x * f.weight / (f.weight + t)
    if isinstance(f, LinearFn):
        return f.slope.copy()
    raise TypeError(type(f).__name__)


def _property_functions(rng):
    n = 4
    c = rng.standard_normal(n)
    lo = -rng.random(n)
    return [
        IndicatorBall(c, 1.5),
        IndicatorSingleton(c),
        IndicatorBox(lo, lo + 2.0 * rng.random(n) + 0.1),
        NormL1(n),
        NormL2(n),
        SquaredNorm(n, 2.5),
        LinearFn(c),
        IndicatorHalfspace(c, 0.3),
        IndicatorHyperplane(c, -0.7),
        Quadratic(np.diag(rng.random(n) + 0.5), c, 1.0),
    ]


def criterion_properties(seed=0, tol=None):
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    funcs = _property_functions(rng)
    moreau = firm = fy = decomp = 0.0
    for f in funcs:
        for _ in range(40):
            x = 3.0 * rng.standard_normal(f.dim)
            y = 3.0 * rng.standard_normal(f.dim)
            t = float(rng.uniform(0.2, 3.0))
            px = f.prox(x, t)
            if type(f) in (IndicatorBall, IndicatorSingleton, IndicatorBox, NormL1, NormL2, SquaredNorm, LinearFn):
                # x = prox_{t f}(x) + t prox_{f^*/t}(x/t)
                err = np.linalg.norm(x - px - t * _conj_prox_oracle(f, x / t, 1.0 / t))
                moreau = max(moreau, err / (1.0 + np.linalg.norm(x)))
            py = f.prox(y, t)
            dp = px - py
            firm = max(firm, float(dp @ dp - dp @ (x - y)))
            # Fenchel-Young equality at p = prox_f(x), s = x - p in df(p)
            p = f.prox(x, 1.0)
            s = x - p
            fp, fs = f(p), f.conjugate(s)
            gap = INF if INF in (fp, fs) else abs(fp + fs - p @ s)
            fy = max(fy, gap / (1.0 + abs(p @ s)))
            # Fenchel-Young inequality at an unrelated pair
            if f(p) + f.conjugate(y) < p @ y - 1e-9 * (1.0 + abs(p @ y)):
                fy = INF
    parts = funcs[:4]
    total = DecomposableSum(parts)
    for _ in range(40):
        x = 3.0 * rng.standard_normal(total.dim)
        t = float(rng.uniform(0.2, 3.0))
        blocks = np.split(x, np.cumsum([p.dim for p in parts])[:-1])
        joined = np.concatenate([p.prox(b, t) for p, b in zip(parts, blocks)])
        decomp = max(decomp, float(np.linalg.norm(total.prox(x, t) - joined)))
        cj = sum(p.conjugate(b) for p, b in zip(parts, blocks))
        tc = total.conjugate(x)
        if not (tc == cj or abs(tc - cj) <= 1e-12 * (1.0 + abs(cj))):
            decomp = INF
    # translation invariance along Fix R forces dom f^* into (Fix R)^perp
    R, f, _, _ = _scenario("invariant_hyperplane")
    ops = build(R)
    inv = is_translation_invariant(f, ops.A, rng=seed)
    blown = 0
    for _ in range(20):
        y = rng.standard_normal(R.dim)
        blown += f.conjugate(y) == INF and np.linalg.norm(ops.A @ y) > 1e-6
    checks = [
        (moreau <= _thr(1e-12, tol), f"Moreau identity {moreau:.1e}"),
        (firm <= _thr(1e-10, tol), f"firm nonexpansiveness slack {firm:.1e}"),
        (fy <= _thr(1e-9, tol), f"Fenchel-Young {fy:.1e}"),
        (decomp <= _thr(1e-12, tol), f"decomposable prox/conjugate {decomp:.1e}"),
        (inv and blown == 20, f"invariant f: conjugate infinite off (Fix R)^perp ({blown}/20)"),
    ]
    return _finish(8, "convex-analysis property suites", 30.0, t0, checks)


CRITERIA = (
    criterion_fixtures,
    criterion_identities,
    criterion_projector,
    criterion_ed_pair,
    criterion_two_lines,
    criterion_phantom,
    criterion_unattained,
    criterion_properties,
)


def run_all(seed=0, tol=None, echo=None) -> list[CriterionResult]:
    out = []
    for crit in CRITERIA:
        res = crit(seed=seed, tol=tol)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'#':>2}  {'criterion':<{width}}  result  time(s)  detail"]
    for r in results:
        lines.append(f"{r.number:>2}  {r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  "
                     f"{r.seconds:7.2f}  {r.detail}")
    return "\n".join(lines)
