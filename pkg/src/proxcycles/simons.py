"""The average / displacement algebra of a root of the identity.

For ``R`` with ``R^m = Id``::

    A = (1/m) sum_{i=1..m} R^i        (average)
    S = R - Id                        (displacement)
    Q = (1/m) sum_{i=1..m-1} i R^i    (inverse of S on Y = ker A)

When ``R`` is an isometry, ``A`` is the orthogonal projector onto
``Fix R`` and ``Y = (Fix R)^perp = ran S``.  Fix R and Y are always read
off ``A``; no null-space routine is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, InvalidRootError, UnsupportedError
from .roots import TOL_ALGEBRA, RootOperator, is_isometry, verify_root

TOL_SOLVER = 1e-8

ISOMETRY_ONLY = ("isometry_trick", "skew_Q0")


@dataclass(frozen=True, eq=False)
class SimonsOperators:
    R: RootOperator
    A: np.ndarray
    S: np.ndarray
    Q: np.ndarray
    isometric: bool

    @property
    def dim(self) -> int:
        return self.R.dim

    @property
    def m(self) -> int:
        return self.R.order

    @property
    def P_Y(self) -> np.ndarray:
        """``Id - A``; the projector onto Y when R is isometric."""
        return self._p_y

    @property
    def M(self) -> np.ndarray:
        """``-Q_0`` realised on X as ``-(Id - A) Q (Id - A)``."""
        return self._minus_q0

    def __post_init__(self):
        p_y = np.eye(self.dim) - self.A
        object.__setattr__(self, "_p_y", p_y)
        object.__setattr__(self, "_minus_q0", -(p_y @ self.Q @ p_y))

    def fix_basis(self) -> np.ndarray:
        """Orthonormal basis (columns) of Fix R = ran A."""
        _require_isometric(self)
        w, v = np.linalg.eigh(0.5 * (self.A + self.A.T))
        return v[:, w > 0.5].copy()

    def y_is_trivial(self) -> bool:
        return bool(np.linalg.norm(self._p_y) <= TOL_ALGEBRA)

    def fix_is_trivial(self) -> bool:
        return bool(np.linalg.norm(self.A) <= TOL_ALGEBRA)


def build(R: RootOperator, tol: float = TOL_ALGEBRA) -> SimonsOperators:
    ok, resid = verify_root(R, tol)
    if not ok:
        raise InvalidRootError(f"||R^{R.order} - Id||_F = {resid:.3e} exceeds {tol:.1e}")
    m = R.order
    n = R.dim
    powers = [np.eye(n)]
    for _ in range(m):
        powers.append(powers[-1] @ R.matrix)
    A = sum(powers[1:]) / m
    Q = sum((i * powers[i] for i in range(1, m)), np.zeros((n, n))) / m
    S = R.matrix - np.eye(n)
    iso, _ = is_isometry(R, tol)
    return SimonsOperators(R=R, A=A, S=S, Q=Q, isometric=iso)


def _require_isometric(ops):
    if not ops.isometric:
        raise UnsupportedError(
            "R is not an isometry, so its average A need not be an orthogonal projector"
        )


def projector_fix(ops: SimonsOperators) -> np.ndarray:
    """Orthogonal projector onto Fix R, which equals the average ``A``."""
    _require_isometric(ops)
    return ops.A.copy()


def projector_Y(ops: SimonsOperators) -> np.ndarray:
    _require_isometric(ops)
    return ops.P_Y.copy()


def s_preimage(ops: SimonsOperators, y, tol: float = TOL_SOLVER) -> np.ndarray:
    """Return ``u`` with ``S u = y`` for ``y`` in Y.

    Uses ``u = -(1/m) sum_{k=0}^{m-2} (m-1-k) R^k y``.  The result need not
    lie in Y.
    """
    _require_isometric(ops)
    y = np.asarray(y, dtype=float)
    if y.shape != (ops.dim,):
        raise DimensionError(f"expected vector of length {ops.dim}, got shape {y.shape}")
    if np.linalg.norm(ops.A @ y) > tol * (1.0 + np.linalg.norm(y)):
        raise DomainError("y is not in Y = (Fix R)^perp, so it is not in the range of S")
    m = ops.m
    x = np.zeros_like(y)
    rk = y.copy()
    for k in range(m - 1):
        x += (m - 1 - k) * rk
        rk = ops.R.apply(rk)
    return -x / m


def verify_identities(ops: SimonsOperators, samples: int = 100, rng=None) -> dict:
    """Maximum normalised residuals of the Simons identities.

    Vector residuals are divided by ``1 + ||x||`` and the two quadratic
    form residuals (``isometry_trick``, ``skew_Q0``) by ``1 + ||x||^2``.
    The keys listed in :data:`ISOMETRY_ONLY` are only expected to vanish
    for isometric roots.
    """
    rng = np.random.default_rng(rng)
    n = ops.dim
    eye = np.eye(n)
    A, S, Q = ops.A, ops.S, ops.Q
    P = eye - A
    names = ("AS", "SA", "SQ", "QS", "S_Qy", "Q_Sy", "isometry_trick", "skew_Q0")
    report = dict.fromkeys(names, 0.0)
    skew = -Q - 0.5 * eye
    for _ in range(samples):
        x = rng.standard_normal(n)
        nx = np.linalg.norm(x)
        lin = 1.0 + nx
        quad = 1.0 + nx * nx
        y = P @ x
        sx = S @ x
        vals = {
            "AS": np.linalg.norm(A @ sx) / lin,
            "SA": np.linalg.norm(S @ (A @ x)) / lin,
            "SQ": np.linalg.norm(S @ (Q @ x) - y) / lin,
            "QS": np.linalg.norm(Q @ sx - y) / lin,
            "S_Qy": np.linalg.norm(S @ (Q @ y) - y) / lin,
            "Q_Sy": np.linalg.norm(Q @ (S @ y) - y) / lin,
            "isometry_trick": abs(2.0 * (x @ sx) + sx @ sx) / quad,
            "skew_Q0": abs(y @ (skew @ y)) / quad,
        }
        for key, val in vals.items():
            if val > report[key]:
                report[key] = float(val)
    return report


def identity_failures(report: dict, isometric: bool, tol: float = TOL_ALGEBRA) -> list[str]:
    """Names of identities in ``report`` that should hold but exceed ``tol``."""
    return [
        name for name, val in report.items()
        if (isometric or name not in ISOMETRY_ONLY) and not val <= tol
    ]
