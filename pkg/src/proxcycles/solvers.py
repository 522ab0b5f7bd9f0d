"""Fixed-point and splitting machinery.

* :func:`km_fixed_point` -- Krasnosel'skii-Mann iteration of a nonexpansive map.
* :func:`douglas_rachford` -- zeros of ``A + B`` from the two resolvents.
* :func:`resolvent_linear` / :class:`LinearResolvent` -- ``(Id + step M)^{-1}``
  for a monotone matrix ``M``.
* :class:`PhantomProx` -- proximal map of the phantom function
  ``cl(f [] iota_{Y^perp})`` and of its conjugate ``f^* + iota_Y``.

Resolvent handles are callables ``r(x, step)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
import scipy.linalg

from .errors import DivergenceError, NumericError, PhantomProxError
from .simons import SimonsOperators, _require_isometric

DIVERGENCE_BOUND = 1e12


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 100_000
    relaxation: float = 0.5
    dr_step: float = 1.0
    inner_tol: float = 1e-10
    inner_max_iter: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.relaxation <= 1.0:
            raise ValueError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if not self.tol > 0 or not self.dr_step > 0 or not self.inner_tol > 0:
            raise ValueError("tol, dr_step and inner_tol must be positive")
        if int(self.max_iter) < 1 or int(self.inner_max_iter) < 1:
            raise ValueError("iteration limits must be positive")

    @classmethod
    def from_dict(cls, data: dict | None) -> "SolverConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown solver keys: {sorted(unknown)}")
        for key in ("max_iter", "inner_max_iter"):
            if key in data:
                data[key] = int(data[key])
        return cls(**data)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class SolveTrace:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "residual"])
            for k, r in enumerate(self.residual_history, start=1):
                writer.writerow([k, repr(float(r))])


def _check_finite(z, trace, what):
    nz = float(np.linalg.norm(z))
    if not math.isfinite(nz) or nz > DIVERGENCE_BOUND:
        raise DivergenceError(f"{what} diverged after {trace.iterations} iterations "
                              f"(||z|| = {nz:.3e})", trace=trace, last=z)
    return nz


def km_fixed_point(T, z0, cfg: SolverConfig = SolverConfig(), callback=None):
    """Iterate ``z <- (1 - theta) z + theta T z``.

    Stops once ``||z - T z|| <= tol (1 + ||z||)``; returns ``(z, trace)``
    with ``trace.converged`` telling whether that happened before
    ``max_iter``.  ``callback(k, z)`` is invoked after each update.

    Raises :class:`DivergenceError` on non-finite iterates or
    ``||z|| > 1e12``.
    """
    z = np.array(z0, dtype=float)
    theta = cfg.relaxation
    trace = SolveTrace()
    hist = trace.residual_history
    nz = _check_finite(z, trace, "KM iteration")
    for _ in range(cfg.max_iter):
        tz = T(z)
        diff = tz - z
        r = float(np.linalg.norm(diff))
        hist.append(r)
        if not math.isfinite(r):
            raise DivergenceError("KM iteration produced non-finite values", trace=trace, last=z)
        if r <= cfg.tol * (1.0 + nz):
            trace.converged = True
            return z, trace
        z = z + theta * diff
        trace.iterations += 1
        nz = _check_finite(z, trace, "KM iteration")
        if callback is not None:
            callback(trace.iterations, z)
    return z, trace


def douglas_rachford(resolventA, resolventB, x0, cfg: SolverConfig = SolverConfig(),
                     tol=None, max_iter=None, callback=None):
    """Douglas-Rachford splitting for ``0 in A u + B u``.

    With ``g = cfg.dr_step``::

        u = J_{gB}(x);  w = J_{gA}(2u - x);  x <- x + w - u

    The shadow ``u`` is returned once ``||w - u|| <= tol (1 + ||u||)``.
    Returns ``(u, trace, x)``; the governing sequence ``x`` allows warm
    starts.  ``tol`` and ``max_iter`` default to the config values.
    """
    tol = cfg.tol if tol is None else tol
    max_iter = cfg.max_iter if max_iter is None else max_iter
    g = cfg.dr_step
    x = np.array(x0, dtype=float)
    trace = SolveTrace()
    hist = trace.residual_history
    u = resolventB(x, g)
    for _ in range(max_iter):
        w = resolventA(2.0 * u - x, g)
        diff = w - u
        r = float(np.linalg.norm(diff))
        hist.append(r)
        if r <= tol * (1.0 + float(np.linalg.norm(u))):
            trace.converged = True
            return u, trace, x
        x = x + diff
        trace.iterations += 1
        _check_finite(x, trace, "Douglas-Rachford")
        if callback is not None:
            callback(trace.iterations, x)
        u = resolventB(x, g)
    return u, trace, x


def check_monotone(M, samples: int = 100, rng=0, tol: float = -1e-10) -> bool:
    """Probabilistic check of ``<x, M x> >= tol ||x||^2``."""
    M = np.asarray(M, dtype=float)
    rng = np.random.default_rng(rng)
    for _ in range(samples):
        x = rng.standard_normal(M.shape[0])
        if x @ (M @ x) < tol * (x @ x):
            return False
    return True


class LinearResolvent:
    """``v -> (Id + step M)^{-1} v`` with cached LU factors per step."""

    def __init__(self, M, check=True):
        self.M = np.asarray(M, dtype=float)
        n = self.M.shape[0]
        if self.M.shape != (n, n):
            raise ValueError("M must be square")
        if check and not check_monotone(self.M):
            raise ValueError("M is not monotone: <x, Mx> < 0 for some sampled x")
        self._eye = np.eye(n)
        self._factors = {}

    def __call__(self, v, step=1.0):
        fac = self._factors.get(step)
        if fac is None:
            mat = self._eye + step * self.M
            try:
                fac = scipy.linalg.lu_factor(mat, check_finite=True)
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise NumericError(f"Id + {step} M could not be factored: {exc}") from exc
            if np.min(np.abs(np.diag(fac[0]))) <= 1e-14 * (1.0 + np.abs(mat).max()):
                raise NumericError(f"Id + {step} M is singular")
            self._factors[step] = fac
        return scipy.linalg.lu_solve(fac, v)


def resolvent_linear(M, step: float, v) -> np.ndarray:
    """Solve ``(Id + step M) u = v`` for monotone ``M``."""
    if not step > 0:
        raise ValueError("step must be positive")
    return LinearResolvent(M)(np.asarray(v, dtype=float), step)


def _anderson(W, F):
    """Type-II Anderson mixing of the stored images ``W`` and residuals ``F``."""
    if len(F) < 2:
        return W[-1]
    dF = np.diff(np.array(F), axis=0).T
    dW = np.diff(np.array(W), axis=0).T
    gamma, *_ = np.linalg.lstsq(dF, F[-1], rcond=1e-12)
    return W[-1] - dW @ gamma


def marginal_prox(f, P_Y, x, step: float = 1.0, tol: float = 1e-10, max_iter: int = 10_000,
                  memory: int = 5, window: int = 10, polish: int = 20):
    """``prox_{step h}(x)`` for ``h = cl(f [] iota_{Y^perp})``, from the primal side.

    The answer is ``P_Y w + (Id - P_Y) x`` where ``w`` (approximately)
    minimises ``F(w) = step f(w) + 0.5 ||P_Y (w - x)||^2``.  The infimum of
    ``F`` need not be attained; minimising sequences may then run off to
    infinity along ``Y^perp``.  Two devices keep that drift cheap:

    * Anderson mixing (``memory`` images) of the prox-gradient map
      ``G(w) = prox_{step f}((Id - P_Y) w + P_Y x)``;
    * every ``window`` steps, a doubling line search along the recent
      ``Y^perp`` displacement.  A trial point is smoothed by ``polish``
      plain ``G`` steps and kept only if it lowers ``F``.

    Stops once two successive windows each change ``z`` by at most
    ``tol (1 + ||z||)``.  Returns ``(z, trace)``.
    """
    P_Y = np.asarray(P_Y, dtype=float)
    P_fix = np.eye(P_Y.shape[0]) - P_Y
    x = np.asarray(x, dtype=float)
    xy = P_Y @ x
    xfix = x - xy

    def G(w):
        return f.prox(P_fix @ w + xy, step)

    def objective(w):
        r = P_Y @ w - xy
        return step * f(w) + 0.5 * (r @ r)

    trace = SolveTrace()
    hist = trace.residual_history
    best = G(x)
    f_best = objective(best)
    w = best
    W, Fr = [], []
    anchor = origin = best
    direction = None
    z_prev = P_Y @ best + xfix
    quiet = 0
    while trace.iterations < max_iter:
        for _ in range(window):
            gw = G(w)
            W.append(gw)
            Fr.append(gw - w)
            del W[:-memory - 1], Fr[:-memory - 1]
            w = _anderson(W, Fr)
            trace.iterations += 1
            if not np.all(np.isfinite(w)):
                w = gw
                W, Fr = [], []
        base = G(w)
        f_base = objective(base)
        if not f_base <= f_best:
            base, f_base = best, f_best
        # recent drift, last successful jump, drift since the start
        moved = False
        for s in (P_fix @ (base - anchor), direction, P_fix @ (base - origin)):
            if s is None or not np.linalg.norm(s) > 1e-12 * (1.0 + np.linalg.norm(base)):
                continue
            a = 1.0
            while a < 1e30:
                trial = base + a * s
                for _ in range(polish):
                    trial = G(trial)
                f_trial = objective(trial)
                trace.iterations += polish
                if not f_trial < f_base:
                    break
                base, f_base = trial, f_trial
                moved = True
                a *= 2.0
            if moved:
                direction = 0.5 * a * s
                W, Fr = [], []
                break
        best, f_best = base, f_base
        w = anchor = base
        z = P_Y @ base + xfix
        change = float(np.linalg.norm(z - z_prev))
        hist.append(change)
        z_prev = z
        quiet = quiet + 1 if change <= tol * (1.0 + float(np.linalg.norm(z))) else 0
        if quiet >= 2:
            trace.converged = True
            break
    return P_Y @ best + xfix, trace


class PhantomProx:
    """Proximal maps attached to ``f`` and the subspace ``Y = (Fix R)^perp``.

    ``conj_prox(v, step)`` evaluates ``prox_{step (f^* + iota_Y)}(v)`` with an
    inner Douglas-Rachford on the pair ``(step f^* + 0.5||. - v||^2, iota_Y)``;
    ``__call__(x, step)`` then gives the prox of the phantom function
    ``cl(f [] iota_{Y^perp})`` through the Moreau identity (its conjugate is
    ``f^* + iota_Y``).

    When ``Y`` misses the relative interior of ``dom f^*`` the inner DR may
    have no fixed point and stall.  After the first such failure the instance
    switches to :func:`marginal_prox` for good (``method`` tells which one is
    in use).  Each instance warm-starts the inner DR from its previous state,
    so reuse one instance along an outer iteration.
    """

    def __init__(self, f, ops: SimonsOperators, cfg: SolverConfig = SolverConfig()):
        _require_isometric(ops)
        if f.dim != ops.dim:
            raise ValueError(f"function dimension {f.dim} does not match root dimension {ops.dim}")
        self.f = f
        self.ops = ops
        self.cfg = cfg
        self.P_Y = ops.P_Y
        self._y_trivial = ops.y_is_trivial()
        self._fix_trivial = ops.fix_is_trivial()
        self._warm = None
        self.method = "douglas_rachford"
        self.last_trace = None
        self.inner_iterations = 0

    def _project_y(self, x, step=None):
        return self.P_Y @ x

    def _dr(self, v, step):
        f = self.f

        def smooth_part(w, t):
            # prox of t*(step f^* + 0.5||. - v||^2)
            return f.prox_conjugate((t * v + w) / (1.0 + t), step * t / (1.0 + t))

        x0 = self._warm if self._warm is not None else v
        u, trace, x = douglas_rachford(smooth_part, self._project_y, x0, self.cfg,
                                       tol=self.cfg.inner_tol, max_iter=self.cfg.inner_max_iter)
        self._record(trace)
        if not trace.converged:
            self._warm = None
            self.method = "marginal"
            return None
        self._warm = x
        return u

    def _marginal(self, x, step):
        z, trace = marginal_prox(self.f, self.P_Y, x, step, tol=self.cfg.inner_tol,
                                 max_iter=self.cfg.inner_max_iter)
        self._record(trace)
        if not trace.converged:
            raise PhantomProxError(
                f"prox of cl(f [] iota_Y^perp) did not settle to {self.cfg.inner_tol:.1e} "
                f"in {trace.iterations} iterations (last change "
                f"{trace.residual_history[-1]:.3e}); inner Douglas-Rachford had "
                f"stalled before", trace=trace)
        return z

    def _record(self, trace):
        self.last_trace = trace
        self.inner_iterations += trace.iterations

    def conj_prox(self, v, step: float = 1.0) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self._y_trivial:
            return np.zeros_like(v)
        if self._fix_trivial:
            return self.f.prox_conjugate(v, step)
        if self.method == "douglas_rachford":
            u = self._dr(v, step)
            if u is not None:
                return u
        return v - step * self._marginal(v / step, 1.0 / step)

    def __call__(self, x, step: float = 1.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._y_trivial:
            return x.copy()
        if self._fix_trivial:
            return self.f.prox(x, step)
        if self.method == "douglas_rachford":
            u = self._dr(x / step, 1.0 / step)
            if u is not None:
                return x - step * u
        return self._marginal(x, step)


def prox_phantom(f, ops: SimonsOperators, x, step: float = 1.0,
                 cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """``prox_{step cl(f [] iota_{Y^perp})}(x)`` (one-shot, no warm start)."""
    return PhantomProx(f, ops, cfg)(x, step)
