"""Classical and phantom cycles, gap vectors and the ``(e, d)`` pair.

For an isometric root ``R`` (``S = R - Id``, ``Y = (Fix R)^perp``) and a
convex ``f`` with ``Y`` meeting ``dom f^*``:

* a *cycle* is a fixed point ``z = Prox_f(R z)``; its gap vector is ``S z``;
* ``(e, d)`` is the unique pair in ``Y x Y`` with ``d = S e``, ``e = Q d``
  and ``e in d(f^* + iota_Y)(d)``; every cycle has gap vector ``d``;
* the *phantom cycles* (cycles of ``cl(f [] iota_{Y^perp})``) exist for every such f
  and form the affine set ``e + Fix R``.

All routines return residual diagnostics instead of asserting exactness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, NumericError, PreconditionError, UnsupportedError
from .functions import INF, ConvexFunction
from .simons import SimonsOperators, build
from .solvers import (LinearResolvent, PhantomProx, SolverConfig, SolveTrace,
                      km_fixed_point, douglas_rachford)

CONVERGED = "Converged"
NO_CYCLE = "NoCycleDetected"
DIVERGED = "Diverged"

ATTOUCH_THERA_STEPS = (0.5, 1.0, 2.0)


@dataclass
class EDPair:
    e: np.ndarray
    d: np.ndarray
    residuals: dict = field(default_factory=dict)
    trace: SolveTrace | None = None


@dataclass
class CycleResult:
    z: np.ndarray
    gap: np.ndarray
    status: str
    trace: SolveTrace
    characterization: dict = field(default_factory=dict)


@dataclass
class PhantomResult:
    """Phantom cycle set ``base + span(directions)`` and its ``(e, d)``.

    ``z`` is the phantom cycle the fixed-point search landed on and
    ``cross_check`` compares ``(e, d)`` with an independent
    :func:`solve_ed` run.
    """

    ed: EDPair
    base: np.ndarray
    directions: np.ndarray
    z: np.ndarray
    trace: SolveTrace
    cross_check: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.trace.converged


def _ops(R, f=None) -> SimonsOperators:
    ops = R if isinstance(R, SimonsOperators) else build(R)
    if not ops.isometric:
        raise UnsupportedError("cycle computations need an isometric root")
    if f is not None and f.dim != ops.dim:
        raise ValueError(f"function dimension {f.dim} does not match root dimension {ops.dim}")
    return ops


def find_cycle(f: ConvexFunction, R, z0=None, cfg: SolverConfig = SolverConfig()) -> CycleResult:
    """Search for ``z = Prox_f(R z)`` by Krasnosel'skii-Mann iteration.

    ``NoCycleDetected`` means the fixed-point residual stayed above the
    tolerance for the whole iteration budget (in particular its last 10%);
    it is a heuristic verdict, not a proof that no cycle exists.
    """
    ops = _ops(R, f)
    root = ops.R
    z0 = np.zeros(ops.dim) if z0 is None else np.asarray(z0, dtype=float)

    def T(z):
        return f._prox(root.apply(z), 1.0)

    try:
        z, trace = km_fixed_point(T, z0, cfg)
        status = CONVERGED if trace.converged else NO_CYCLE
        # the prox image lies in dom f, the KM average need not
        z = T(z)
    except DivergenceError as exc:
        z, trace, status = exc.last, exc.trace, DIVERGED
    hist = trace.residual_history
    tail = hist[-max(1, len(hist) // 10):] if hist else [math.nan]
    rz = root.apply(z)
    gap = rz - z
    char = {
        "fixed_point": float(np.linalg.norm(z - f.prox(rz))),
        "tail_min_residual": float(min(tail)),
        "fenchel": _fenchel_residual(f, z, gap),
    }
    return CycleResult(z=z, gap=gap, status=status, trace=trace, characterization=char)


def _fenchel_residual(f, z, sz):
    fz = f(z)
    fs = f.conjugate(sz)
    if fz == INF or fs == INF:
        return INF
    return abs(fs + fz + 0.5 * float(sz @ sz))


def solve_ed(f: ConvexFunction, R, cfg: SolverConfig = SolverConfig(), x0=None,
             samples: int = 20, rng=0) -> EDPair:
    """Compute the unique ``(e, d)`` in ``Y x Y``.

    ``d`` solves ``0 in d(f^* + iota_Y)(d) - Q_0 d`` and is found by
    Douglas-Rachford with the resolvent of ``-Q_0`` on one side and
    ``prox(f^* + iota_Y)`` (itself an inner Douglas-Rachford) on the other;
    then ``e = Q d``.  ``x0`` seeds the outer governing sequence.
    """
    ops = _ops(R, f)
    cprox = PhantomProx(f, ops, cfg)
    n = ops.dim
    if ops.y_is_trivial():
        if f.conjugate(np.zeros(n)) == INF:
            raise PreconditionError("Y = {0} does not meet dom f*: f is unbounded below")
        d = np.zeros(n)
        trace = SolveTrace(converged=True)
    else:
        lin = LinearResolvent(ops.M)
        x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
        d, trace, _ = douglas_rachford(lin, cprox.conj_prox, x0, cfg)
        if not trace.converged:
            last = trace.residual_history[-1] if trace.residual_history else math.nan
            raise NumericError(
                f"solve_ed: Douglas-Rachford did not converge in {trace.iterations} iterations "
                f"(last residual {last:.3e}); check that Y meets dom f*", trace=trace)
    e = ops.Q @ d
    ed = EDPair(e=e, d=d, trace=trace)
    ed.residuals = ed_residuals(f, ops, ed, cprox, samples=samples, rng=rng)
    return ed


def ed_residuals(f, ops, ed: EDPair, cprox=None, samples: int = 20, rng=0) -> dict:
    """Membership, consistency and subgradient residuals for ``(e, d)``.

    ``subgradient_inequality`` is the largest violation of
    ``f^*(d) + <y - d, e> - f^*(y) <= 0`` over sampled ``y`` in
    ``Y cap dom f^*`` (taken from the conjugate prox of random points).
    """
    e, d = ed.e, ed.d
    cprox = cprox or PhantomProx(f, ops)
    rng = np.random.default_rng(rng)
    fd = f.conjugate(d)
    worst = 0.0
    if fd == INF:
        worst = INF
    else:
        for _ in range(samples):
            y = cprox.conj_prox(3.0 * rng.standard_normal(ops.dim), 1.0)
            fy = f.conjugate(y)
            if fy == INF:
                continue
            worst = max(worst, fd + float((y - d) @ e) - fy)
    return {
        "A_e": float(np.linalg.norm(ops.A @ e)),
        "A_d": float(np.linalg.norm(ops.A @ d)),
        "Se_minus_d": float(np.linalg.norm(ops.S @ e - d)),
        "Qd_minus_e": float(np.linalg.norm(ops.Q @ d - e)),
        "conjugate_at_d": fd,
        "inclusion": float(np.linalg.norm(cprox.conj_prox(d + e, 1.0) - d)),
        "subgradient_inequality": worst,
    }


def phantom_value(f, ops, e) -> float:
    """``cl(f [] iota_{Y^perp})(e) = <S e, e> - f^*(S e)``, valid at the ``e`` of the (e, d) pair."""
    se = ops.S @ e
    fs = f.conjugate(se)
    return -INF if fs == INF else float(se @ e) - fs


def check_cycle_characterization(f, R, z, ed: EDPair) -> dict:
    """Residuals of the four equivalent descriptions of a cycle ``z``.

    ``fixed_point``  ``||z - Prox_f(R z)||``
    ``fenchel``      ``|f^*(S z) + f(z) + ||S z||^2 / 2|``
    ``gap_match``    ``||S z - d||``
    ``phantom_value_match``  ``|f(z) - cl(f [] iota_{Y^perp})(e)|``

    Infinite function values give infinite residuals.
    """
    ops = _ops(R, f)
    z = np.asarray(z, dtype=float)
    rz = ops.R.apply(z)
    sz = rz - z
    fz = f(z)
    pv = phantom_value(f, ops, ed.e)
    return {
        "fixed_point": float(np.linalg.norm(z - f.prox(rz))),
        "fenchel": _fenchel_residual(f, z, sz),
        "gap_match": float(np.linalg.norm(sz - ed.d)),
        "phantom_value_match": INF if (fz == INF or not math.isfinite(pv)) else abs(fz - pv),
    }


def find_phantom(f: ConvexFunction, R, cfg: SolverConfig = SolverConfig(), z0=None,
                 ed: EDPair | None = None) -> PhantomResult:
    """Find a phantom cycle and read off ``e = (Id - A) z'`` and ``d = S z'``.

    The phantom cycle set is returned as ``e + span(directions)`` where the
    columns of ``directions`` are an orthonormal basis of ``Fix R``.  The
    pair is cross-checked against :func:`solve_ed` (computed unless ``ed``
    is given).
    """
    ops = _ops(R, f)
    prox = PhantomProx(f, ops, cfg)
    z0 = np.zeros(ops.dim) if z0 is None else np.asarray(z0, dtype=float)
    root = ops.R

    def T(z):
        return prox(root.apply(z), 1.0)

    z, trace = km_fixed_point(T, z0, cfg)
    z = T(z)
    e = ops.P_Y @ z
    d = ops.S @ z
    if ed is None:
        ed = solve_ed(f, ops, cfg)
    found = EDPair(e=e, d=d, trace=trace)
    found.residuals = ed_residuals(f, ops, found, prox)
    cross = {
        "e": float(np.linalg.norm(e - ed.e)),
        "d": float(np.linalg.norm(d - ed.d)),
        "fixed_point": float(np.linalg.norm(z - T(z))),
    }
    return PhantomResult(ed=found, base=e, directions=ops.fix_basis(), z=z, trace=trace,
                         cross_check=cross)


def phantom_translate_residuals(f, R, result: PhantomResult, samples: int = 10, rng=0,
                                cfg: SolverConfig = SolverConfig(), scale: float = 3.0) -> np.ndarray:
    """``||z - prox_phantom(R z)|| / (1 + ||z||)`` for random ``z`` in ``e + Fix R``."""
    ops = _ops(R, f)
    prox = PhantomProx(f, ops, cfg)
    rng = np.random.default_rng(rng)
    k = result.directions.shape[1]
    out = []
    for _ in range(samples):
        z = result.base + result.directions @ (scale * rng.standard_normal(k))
        out.append(np.linalg.norm(z - prox(ops.R.apply(z), 1.0)) / (1.0 + np.linalg.norm(z)))
    return np.array(out)


def verify_attouch_thera(f, R, ed: EDPair, cfg: SolverConfig = SolverConfig(),
                         steps=ATTOUCH_THERA_STEPS) -> dict:
    """Check that ``e`` solves the primal and ``d`` the dual inclusion.

    primal  ``S e in d cl(f [] iota_{Y^perp})(e)``  as  ``prox_phantom(e + t S e, t) = e``
    dual    ``e in d(f^* + iota_Y)(d)``              as  ``prox_{t(f^*+iota_Y)}(d + t e) = d``

    for every step ``t`` in ``steps``; the maxima over steps are reported.
    """
    ops = _ops(R, f)
    prox = PhantomProx(f, ops, cfg)
    se = ops.S @ ed.e
    primal = max(float(np.linalg.norm(prox(ed.e + t * se, t) - ed.e)) for t in steps)
    dual = max(float(np.linalg.norm(prox.conj_prox(ed.d + t * ed.e, t) - ed.d)) for t in steps)
    return {"primal": primal, "dual": dual}


def minimizer_cycle_check(f, R, ed: EDPair, z, tol: float = 1e-6) -> tuple[bool, dict]:
    """Decide whether a minimiser ``z`` of ``f`` is a cycle via ``S z = d``.

    Raises :class:`PreconditionError` when ``z`` is not (numerically) a
    minimiser, i.e. ``||z - Prox_f z|| > tol (1 + ||z||)``.  When the gap
    matches, the minimiser must be a fixed point of ``Prox_f R``; a
    violation raises :class:`NumericError`.
    """
    ops = _ops(R, f)
    z = np.asarray(z, dtype=float)
    minres = float(np.linalg.norm(z - f.prox(z, 1.0)))
    if minres > tol * (1.0 + np.linalg.norm(z)):
        raise PreconditionError(f"z is not a minimiser of f (residual {minres:.3e})", residual=minres)
    rz = ops.R.apply(z)
    res = {
        "minimizer": minres,
        "gap_match": float(np.linalg.norm(rz - z - ed.d)),
        "fixed_point": float(np.linalg.norm(z - f.prox(rz))),
    }
    is_cycle = res["gap_match"] <= tol
    if is_cycle and res["fixed_point"] > tol * (1.0 + np.linalg.norm(z)):
        raise NumericError(f"S z = d holds but z is not a cycle (residual {res['fixed_point']:.3e})")
    return is_cycle, res
