"""Proper lsc convex functions with proximal maps and conjugates.

Every function exposes

* ``f(x)``                      value in R or ``+inf``
* ``f.prox(x, step)``           argmin_u f(u) + ||u - x||^2 / (2 step)
* ``f.prox_conjugate(x, step)`` prox of ``step * f^*`` via the Moreau identity
* ``f.conjugate(y)``            closed-form Fenchel conjugate ``f^*(y)``

Indicator membership and conjugate-domain tests use the relative
tolerance ``TOL_FEAS`` so that points produced by projections count as
feasible.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import DimensionError, InconclusiveError, NumericError

TOL_FEAS = 1e-9
INF = math.inf

HYPERBOLA_TOL = 1e-12
HYPERBOLA_MAX_ITER = 100


def _vec(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise DimensionError(f"expected vector of length {dim}, got shape {x.shape}")
    return x


def _close(dist, scale):
    return dist <= TOL_FEAS * (1.0 + scale)


class ConvexFunction:
    """Base class; subclasses implement ``_value``, ``_prox``, ``_conjugate``."""

    dim: int
    is_indicator = False
    type_name = ""

    def __call__(self, x) -> float:
        return self._value(_vec(x, self.dim))

    def prox(self, x, step: float = 1.0) -> np.ndarray:
        if not step > 0:
            raise ValueError(f"prox step must be positive, got {step}")
        return self._prox(_vec(x, self.dim), float(step))

    def prox_conjugate(self, x, step: float = 1.0) -> np.ndarray:
        """``prox_{step f^*}(x) = x - step * prox_{f/step}(x/step)``."""
        if not step > 0:
            raise ValueError(f"prox step must be positive, got {step}")
        x = _vec(x, self.dim)
        return x - step * self._prox(x / step, 1.0 / step)

    def conjugate(self, y) -> float:
        return self._conjugate(_vec(y, self.dim))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class _Indicator(ConvexFunction):
    is_indicator = True

    def _value(self, x):
        p = self._project(x)
        return 0.0 if _close(np.linalg.norm(x - p), np.linalg.norm(x)) else INF

    def _prox(self, x, step):
        return self._project(x)

    def project(self, x):
        return self._project(_vec(x, self.dim))


class IndicatorBox(_Indicator):
    type_name = "indicator_box"

    def __init__(self, lo, hi):
        self.lo = np.array([-INF if v is None else v for v in lo], dtype=float)
        self.hi = np.array([INF if v is None else v for v in hi], dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise DimensionError("box bounds must be vectors of equal length")
        if np.any(self.lo > self.hi):
            raise ValueError("box is empty: lo > hi somewhere")
        self.dim = self.lo.size

    def _project(self, x):
        return np.clip(x, self.lo, self.hi)

    def _conjugate(self, y):
        total = 0.0
        for yi, lo, hi in zip(y, self.lo, self.hi):
            if yi > 0:
                total += yi * hi
            elif yi < 0:
                total += yi * lo
        return total

    def to_dict(self):
        return {"type": self.type_name, "lo": _jsonable(self.lo), "hi": _jsonable(self.hi)}


class IndicatorBall(_Indicator):
    type_name = "indicator_ball"

    def __init__(self, center, radius):
        self.center = np.array(center, dtype=float)
        self.radius = float(radius)
        if self.radius < 0:
            raise ValueError("ball radius must be nonnegative")
        self.dim = self.center.size

    def _project(self, x):
        d = x - self.center
        nd = np.linalg.norm(d)
        if nd <= self.radius:
            return x.copy()
        return self.center + (self.radius / nd) * d

    def _conjugate(self, y):
        return float(self.center @ y + self.radius * np.linalg.norm(y))

    def to_dict(self):
        return {"type": self.type_name, "center": self.center.tolist(), "radius": self.radius}


class IndicatorHyperplane(_Indicator):
    """``{x : <normal, x> = offset}``."""

    type_name = "indicator_hyperplane"

    def __init__(self, normal, offset):
        self.normal = np.array(normal, dtype=float)
        self.offset = float(offset)
        self._nn = float(self.normal @ self.normal)
        if self._nn == 0:
            raise ValueError("hyperplane normal must be nonzero")
        self.dim = self.normal.size

    def _project(self, x):
        return x - ((self.normal @ x - self.offset) / self._nn) * self.normal

    def _conjugate(self, y):
        t = (self.normal @ y) / self._nn
        if not _close(np.linalg.norm(y - t * self.normal), np.linalg.norm(y)):
            return INF
        return float(t * self.offset)

    def to_dict(self):
        return {"type": self.type_name, "normal": self.normal.tolist(), "offset": self.offset}


class IndicatorHalfspace(_Indicator):
    """``{x : <normal, x> <= offset}``."""

    type_name = "indicator_halfspace"

    def __init__(self, normal, offset):
        self.normal = np.array(normal, dtype=float)
        self.offset = float(offset)
        self._nn = float(self.normal @ self.normal)
        if self._nn == 0:
            raise ValueError("halfspace normal must be nonzero")
        self.dim = self.normal.size

    def _project(self, x):
        excess = self.normal @ x - self.offset
        if excess <= 0:
            return x.copy()
        return x - (excess / self._nn) * self.normal

    def _conjugate(self, y):
        ny = np.linalg.norm(y)
        t = (self.normal @ y) / self._nn
        if not _close(np.linalg.norm(y - t * self.normal), ny):
            return INF
        if t < 0:
            if not _close(-t * math.sqrt(self._nn), ny):
                return INF
            t = 0.0
        return float(t * self.offset)

    def to_dict(self):
        return {"type": self.type_name, "normal": self.normal.tolist(), "offset": self.offset}


class IndicatorAffine(_Indicator):
    """``basepoint + span(spanning)``; ``spanning`` lists direction vectors."""

    type_name = "indicator_affine"

    def __init__(self, basepoint, spanning):
        self.basepoint = np.array(basepoint, dtype=float)
        self.dim = self.basepoint.size
        vecs = np.array(spanning, dtype=float).reshape(-1, self.dim)
        self.spanning = vecs
        self._basis = scipy.linalg.orth(vecs.T) if vecs.size else np.zeros((self.dim, 0))

    def _project(self, x):
        u = self._basis
        return self.basepoint + u @ (u.T @ (x - self.basepoint))

    def _conjugate(self, y):
        u = self._basis
        if not _close(np.linalg.norm(u.T @ y), np.linalg.norm(y)):
            return INF
        return float(self.basepoint @ y)

    def to_dict(self):
        return {"type": self.type_name, "basepoint": self.basepoint.tolist(),
                "spanning": self.spanning.tolist()}


class IndicatorSingleton(_Indicator):
    type_name = "indicator_singleton"

    def __init__(self, point):
        self.point = np.array(point, dtype=float)
        self.dim = self.point.size

    def _project(self, x):
        return self.point.copy()

    def _conjugate(self, y):
        return float(self.point @ y)

    def to_dict(self):
        return {"type": self.type_name, "point": self.point.tolist()}


class IndicatorHyperbolaEpigraph(_Indicator):
    """The closed convex set ``{(x, y) : x > 0, x y >= 1}`` in R^2.

    Its recession cone is the nonnegative quadrant, so the support
    function is finite exactly on the nonpositive quadrant.
    """

    type_name = "indicator_hyperbola_epigraph"
    dim = 2

    def __init__(self):
        pass

    def _project(self, x):
        t, s = project_hyperbola(float(x[0]), float(x[1]))
        return np.array([t, s])

    def _conjugate(self, y):
        u, v = float(y[0]), float(y[1])
        tol = TOL_FEAS * (1.0 + math.hypot(u, v))
        if u > tol or v > tol:
            return INF
        u, v = min(u, 0.0), min(v, 0.0)
        if u == 0.0 or v == 0.0:
            return 0.0
        return maximize_on_hyperbola(u, v)

    def to_dict(self):
        return {"type": self.type_name}


def project_hyperbola(p: float, q: float) -> tuple[float, float]:
    """Project ``(p, q)`` onto ``{x > 0, x y >= 1}``.

    Outside points land on the boundary ``(t, 1/t)`` where ``t`` is the
    unique positive root of ``g(t) = t^4 - p t^3 + q t - 1``.  The root is
    bracketed by ``[0, max(1, |p| + |q| + 1)]`` (``g(0) = -1`` and ``g > 0``
    at the right end) and found by Brent's method, which interleaves
    secant/inverse-quadratic steps with bisection, then polished by one
    Newton step.
    """
    if p > 0.0 and q > 0.0 and p * q >= 1.0:
        return p, q
    history = []

    def g(t):
        t2 = t * t
        val = t2 * t2 - p * t2 * t + q * t - 1.0
        history.append((t, val))
        return val

    hi = max(1.0, abs(p) + abs(q) + 1.0)
    try:
        t = scipy.optimize.brentq(g, 0.0, hi, xtol=1e-300, rtol=HYPERBOLA_TOL,
                                  maxiter=HYPERBOLA_MAX_ITER)
    except (RuntimeError, ValueError) as exc:
        raise NumericError(f"hyperbola projection of ({p}, {q}) did not converge: {exc}",
                           trace=history) from None
    t2 = t * t
    dg = 4.0 * t2 * t - 3.0 * p * t2 + q
    if dg > 0.0:
        t_new = t - g(t) / dg
        if t_new > 0.0 and abs(t_new - t) <= 1e3 * HYPERBOLA_TOL * t:
            t = t_new
    return t, 1.0 / t


def maximize_on_hyperbola(u: float, v: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """``sup_{x > 0} u x + v / x`` for ``u, v < 0``.

    In the variable ``t = log x`` the objective ``u e^t + v e^-t`` is
    concave.  A derivative sign change brackets the maximiser, golden
    section shrinks the bracket and Newton on the derivative polishes it.
    """
    def phi(t):
        return u * math.exp(t) + v * math.exp(-t)

    def dphi(t):
        return u * math.exp(t) - v * math.exp(-t)

    lo, hi = -1.0, 1.0
    for _ in range(max_iter):
        if dphi(lo) > 0.0:
            break
        lo *= 2.0
    else:
        raise NumericError("could not bracket the conjugate maximiser from below")
    for _ in range(max_iter):
        if dphi(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise NumericError("could not bracket the conjugate maximiser from above")

    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = phi(c), phi(d)
    while b - a > 1e-6 * (1.0 + abs(a) + abs(b)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = phi(d)
    t = 0.5 * (a + b)
    for _ in range(50):
        step = dphi(t) / phi(t)  # phi'' = phi for this objective
        t_new = min(max(t - step, lo), hi)
        if abs(t_new - t) <= tol * (1.0 + abs(t)):
            t = t_new
            break
        t = t_new
    else:
        raise NumericError(f"Newton polish for conjugate at ({u}, {v}) did not converge")
    return phi(t)


class Quadratic(ConvexFunction):
    """``x -> 0.5 x^T P x + b^T x + c`` with ``P`` symmetric PSD."""

    type_name = "quadratic"

    def __init__(self, P, b, c=0.0):
        self.P = np.array(P, dtype=float)
        self.b = np.array(b, dtype=float)
        self.c = float(c)
        self.dim = self.b.size
        if self.P.shape != (self.dim, self.dim):
            raise DimensionError("Quadratic: P must be dim x dim")
        if np.linalg.norm(self.P - self.P.T) > 1e-12 * (1.0 + np.linalg.norm(self.P)):
            raise ValueError("Quadratic: P must be symmetric")
        w = np.linalg.eigvalsh(self.P)
        if w[0] < -1e-12 * (1.0 + abs(w[-1])):
            raise ValueError("Quadratic: P must be positive semidefinite")
        self._pinv = np.linalg.pinv(self.P, hermitian=True)
        self._factors = {}

    def _value(self, x):
        return float(0.5 * x @ self.P @ x + self.b @ x + self.c)

    def _prox(self, x, step):
        key = step
        fac = self._factors.get(key)
        if fac is None:
            fac = scipy.linalg.cho_factor(np.eye(self.dim) + step * self.P)
            if len(self._factors) < 8:
                self._factors[key] = fac
        return scipy.linalg.cho_solve(fac, x - step * self.b)

    def _conjugate(self, y):
        r = y - self.b
        s = self._pinv @ r
        if not _close(np.linalg.norm(self.P @ s - r), np.linalg.norm(r)):
            return INF
        return float(0.5 * r @ s - self.c)

    def to_dict(self):
        return {"type": self.type_name, "P": self.P.tolist(), "b": self.b.tolist(), "c": self.c}


class SquaredNorm(ConvexFunction):
    """``x -> (weight/2) ||x||^2`` with ``weight > 0``."""

    type_name = "squared_norm"

    def __init__(self, dim, weight=1.0):
        self.dim = int(dim)
        self.weight = float(weight)
        if not self.weight > 0:
            raise ValueError("SquaredNorm weight must be positive")

    def _value(self, x):
        return 0.5 * self.weight * float(x @ x)

    def _prox(self, x, step):
        return x / (1.0 + step * self.weight)

    def _conjugate(self, y):
        return float(y @ y) / (2.0 * self.weight)

    def to_dict(self):
        return {"type": self.type_name, "dim": self.dim, "weight": self.weight}


class LinearFn(ConvexFunction):
    type_name = "linear"

    def __init__(self, slope):
        self.slope = np.array(slope, dtype=float)
        self.dim = self.slope.size

    def _value(self, x):
        return float(self.slope @ x)

    def _prox(self, x, step):
        return x - step * self.slope

    def _conjugate(self, y):
        if _close(np.linalg.norm(y - self.slope), np.linalg.norm(self.slope)):
            return 0.0
        return INF

    def to_dict(self):
        return {"type": self.type_name, "slope": self.slope.tolist()}


class NormL1(ConvexFunction):
    type_name = "norm_l1"

    def __init__(self, dim):
        self.dim = int(dim)

    def _value(self, x):
        return float(np.abs(x).sum())

    def _prox(self, x, step):
        return np.sign(x) * np.maximum(np.abs(x) - step, 0.0)

    def _conjugate(self, y):
        return 0.0 if np.max(np.abs(y), initial=0.0) <= 1.0 + TOL_FEAS else INF

    def to_dict(self):
        return {"type": self.type_name, "dim": self.dim}


class NormL2(ConvexFunction):
    type_name = "norm_l2"

    def __init__(self, dim):
        self.dim = int(dim)

    def _value(self, x):
        return float(np.linalg.norm(x))

    def _prox(self, x, step):
        nx = np.linalg.norm(x)
        if nx <= step:
            return np.zeros_like(x)
        return (1.0 - step / nx) * x

    def _conjugate(self, y):
        return 0.0 if np.linalg.norm(y) <= 1.0 + TOL_FEAS else INF

    def to_dict(self):
        return {"type": self.type_name, "dim": self.dim}


class DecomposableSum(ConvexFunction):
    """``(x_1, ..., x_m) -> f_1(x_1) + ... + f_m(x_m)`` on a product space."""

    type_name = "sum"

    def __init__(self, parts):
        self.parts = list(parts)
        if not self.parts:
            raise ValueError("DecomposableSum needs at least one part")
        self.slices = []
        start = 0
        for p in self.parts:
            self.slices.append(slice(start, start + p.dim))
            start += p.dim
        self.dim = start
        self.is_indicator = all(p.is_indicator for p in self.parts)

    def _value(self, x):
        total = 0.0
        for p, s in zip(self.parts, self.slices):
            total += p._value(x[s])
            if total == INF:
                return INF
        return total

    def _prox(self, x, step):
        return np.concatenate([p._prox(x[s], step) for p, s in zip(self.parts, self.slices)])

    def _conjugate(self, y):
        total = 0.0
        for p, s in zip(self.parts, self.slices):
            total += p._conjugate(y[s])
            if total == INF:
                return INF
        return total

    def to_dict(self):
        return {"type": self.type_name, "parts": [p.to_dict() for p in self.parts]}

    def __repr__(self):
        return f"DecomposableSum({self.parts!r})"


def _jsonable(arr):
    return [None if not math.isfinite(v) else float(v) for v in arr]


_TYPES = {
    "indicator_box": lambda d: IndicatorBox(d["lo"], d["hi"]),
    "indicator_ball": lambda d: IndicatorBall(d["center"], d["radius"]),
    "indicator_hyperplane": lambda d: IndicatorHyperplane(d["normal"], d["offset"]),
    "indicator_halfspace": lambda d: IndicatorHalfspace(d["normal"], d["offset"]),
    "indicator_affine": lambda d: IndicatorAffine(d["basepoint"], d.get("spanning", [])),
    "indicator_singleton": lambda d: IndicatorSingleton(d["point"]),
    "indicator_hyperbola_epigraph": lambda d: IndicatorHyperbolaEpigraph(),
    "quadratic": lambda d: Quadratic(d["P"], d["b"], d.get("c", 0.0)),
    "squared_norm": lambda d: SquaredNorm(d["dim"], d.get("weight", 1.0)),
    "linear": lambda d: LinearFn(d["slope"]),
    "norm_l1": lambda d: NormL1(d["dim"]),
    "norm_l2": lambda d: NormL2(d["dim"]),
    "sum": lambda d: DecomposableSum([function_from_dict(p) for p in d["parts"]]),
}


def function_from_dict(data: dict) -> ConvexFunction:
    """Build a function from its tagged-union JSON form, e.g.
    ``{"type": "indicator_ball", "center": [0, 0], "radius": 1.0}``."""
    if not isinstance(data, dict):
        raise ValueError(f"function description must be an object, got {type(data).__name__}")
    kind = data.get("type")
    if kind not in _TYPES:
        raise ValueError(f"unknown function type {kind!r}; known: {sorted(_TYPES)}")
    try:
        return _TYPES[kind](data)
    except KeyError as exc:
        raise ValueError(f"function description of type {kind!r} is missing key {exc.args[0]!r}") from None


def sample_domain(f: ConvexFunction, rng, scale: float = 3.0) -> np.ndarray:
    """A point of ``dom f``: the prox of a Gaussian draw, rejected if ``f`` is infinite there."""
    for _ in range(10_000):
        x = f.prox(scale * rng.standard_normal(f.dim), 1.0)
        if f(x) < INF:
            return x
    raise InconclusiveError("no point of dom f found after 10000 draws")


def is_translation_invariant(f: ConvexFunction, subspace_projector, samples: int = 50,
                             rng=None, tol: float = 1e-10) -> bool:
    """Test ``f(x + c) == f(x)`` for random ``x`` and ``c`` in a subspace.

    ``subspace_projector`` is the orthogonal projector onto the subspace.
    Points of ``dom f`` are drawn by :func:`sample_domain`; for indicators
    membership of ``x + c`` is compared, and points outside ``dom f`` are
    also checked to stay outside.
    """
    P = np.asarray(subspace_projector, dtype=float)
    if P.shape != (f.dim, f.dim):
        raise DimensionError(f"projector must be {f.dim} x {f.dim}")
    if np.linalg.norm(P @ P - P) > 1e-8 or np.linalg.norm(P - P.T) > 1e-8:
        raise ValueError("subspace_projector must be symmetric and idempotent")
    rng = np.random.default_rng(rng)
    for _ in range(samples):
        x = sample_domain(f, rng)
        c = P @ ((1.0 + np.linalg.norm(x)) * rng.standard_normal(f.dim))
        fx, fxc = f(x), f(x + c)
        if f.is_indicator:
            if (fx < INF) != (fxc < INF):
                return False
            outside = x + 5.0 * rng.standard_normal(f.dim)
            if f(outside) == INF and f(outside + c) < INF:
                return False
        elif fxc == INF or abs(fxc - fx) > tol * (1.0 + abs(fx)):
            return False
    return True
