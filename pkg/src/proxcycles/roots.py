"""Linear m-th roots of the identity on R^n.

A :class:`RootOperator` is a square matrix ``R`` together with a declared
order ``m`` such that ``R^m = Id``.  Structured roots (block right shift,
planar rotation, permutation) keep a fast ``apply`` path next to their
dense matrix, the two always agree.

Isometric roots are the ones the cycle machinery works with; the three
classical non-isometric examples (Bambaii-Chowla's ``B1``, the involution
``B2`` and Turnbull's ``B3``) are available from :func:`classic_fixtures`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidRootError

TOL_ALGEBRA = 1e-10

__all__ = [
    "TOL_ALGEBRA",
    "RootOperator",
    "dense_root",
    "identity_root",
    "right_shift",
    "rotation_root",
    "permutation_root",
    "classic_fixtures",
    "fixture",
    "verify_root",
    "is_isometry",
    "random_isometric_root",
    "root_from_dict",
]


@dataclass(frozen=True, eq=False)
class RootOperator:
    """A linear operator with ``matrix^order = Id``.

    ``kind`` is one of ``"dense"``, ``"identity"``, ``"right_shift"``,
    ``"rotation"`` or ``"permutation"``; ``params`` carries the defining
    parameters of structured kinds.
    """

    matrix: np.ndarray
    order: int
    kind: str = "dense"
    params: dict = field(default_factory=dict)
    name: str | None = None

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"root matrix must be square, got shape {mat.shape}")
        if mat.shape[0] < 1:
            raise DimensionError("root matrix must have dimension >= 1")
        if not np.all(np.isfinite(mat)):
            raise ValueError("root matrix has non-finite entries")
        if int(self.order) < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "order", int(self.order))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x):
        """Return ``R x`` using the structured form when there is one."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"expected vector of length {self.dim}, got shape {x.shape}")
        if self.kind == "identity":
            return x.copy()
        if self.kind == "right_shift":
            m = self.params["m"]
            return np.roll(x.reshape(m, -1), 1, axis=0).reshape(-1)
        if self.kind == "permutation":
            return x[np.asarray(self.params["perm"])]
        return self.matrix @ x

    __call__ = apply

    def power(self, k: int) -> np.ndarray:
        return np.linalg.matrix_power(self.matrix, k)

    def adjoint(self) -> "RootOperator":
        return RootOperator(self.matrix.T.copy(), self.order, name=_adj_name(self.name))

    def to_dict(self) -> dict:
        if self.name is not None and self.name in _FIXTURES:
            return {"fixture": self.name}
        if self.kind == "dense":
            return {"type": "dense", "matrix": self.matrix.tolist(), "order": self.order}
        out = {"type": self.kind}
        out.update(self.params)
        return out


def _adj_name(name):
    return None if name is None else name + "^T"


def dense_root(matrix, order: int, name: str | None = None) -> RootOperator:
    return RootOperator(np.array(matrix, dtype=float), order, name=name)


def identity_root(dim: int) -> RootOperator:
    return RootOperator(np.eye(dim), 1, kind="identity", params={"dim": int(dim)})


def right_shift(m: int, block_dim: int) -> RootOperator:
    """Cyclic right shift ``(x_1, ..., x_m) -> (x_m, x_1, ..., x_{m-1})``.

    Acts on ``(R^block_dim)^m`` flattened to a vector of length
    ``m * block_dim``.
    """
    if m < 1 or block_dim < 1:
        raise ValueError("right_shift needs m >= 1 and block_dim >= 1")
    n = m * block_dim
    mat = np.zeros((n, n))
    eye = np.eye(block_dim)
    for i in range(m):
        j = (i - 1) % m
        mat[i * block_dim:(i + 1) * block_dim, j * block_dim:(j + 1) * block_dim] = eye
    return RootOperator(mat, m, kind="right_shift", params={"m": int(m), "block_dim": int(block_dim)})


def rotation_root(m: int, k: int = 1) -> RootOperator:
    """Planar rotation by ``2*pi*k/m``; its m-th power is the identity."""
    if m < 1:
        raise ValueError("rotation_root needs m >= 1")
    angle = 2.0 * math.pi * k / m
    c, s = _exact_cos_sin(k, m)
    mat = np.array([[c, -s], [s, c]])
    return RootOperator(mat, m, kind="rotation", params={"m": int(m), "k": int(k), "angle": angle})


def _exact_cos_sin(k, m):
    # quarter turns are snapped so that R_{pi/2} and -Id come out exact
    r = (4 * k) % (4 * m)
    if r % m == 0:
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][r // m]
    angle = 2.0 * math.pi * k / m
    return math.cos(angle), math.sin(angle)


def permutation_root(perm, order: int | None = None) -> RootOperator:
    """Coordinate permutation ``(P x)_i = x[perm[i]]``.

    ``order`` defaults to the order of the permutation (lcm of the cycle
    lengths).
    """
    perm = [int(p) for p in perm]
    n = len(perm)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"not a permutation of 0..{n - 1}: {perm}")
    mat = np.zeros((n, n))
    mat[np.arange(n), perm] = 1.0
    if order is None:
        order = _perm_order(perm)
    return RootOperator(mat, order, kind="permutation", params={"perm": perm})


def _perm_order(perm):
    seen = [False] * len(perm)
    order = 1
    for start in range(len(perm)):
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length:
            order = order * length // math.gcd(order, length)
    return order


_FIXTURES = {
    "B1": ([[-1, -1, -1, -1],
            [1, 0, 0, 0],
            [0, 1, 0, 0],
            [0, 0, 1, 0]], 5),
    "B2": ([[1, 1, 1, 1],
            [0, -1, -2, -3],
            [0, 0, 1, 3],
            [0, 0, 0, -1]], 2),
    "B3": ([[-1, 1, -1, 1],
            [-3, 2, -1, 0],
            [-3, 1, 0, 0],
            [-1, 0, 0, 0]], 3),
}


def fixture(name: str) -> RootOperator:
    try:
        mat, order = _FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {sorted(_FIXTURES)}") from None
    return dense_root(mat, order, name=name)


def classic_fixtures() -> list[RootOperator]:
    """The non-isometric roots ``B1`` (order 5), ``B2`` (order 2), ``B3`` (order 3)."""
    return [fixture(name) for name in ("B1", "B2", "B3")]


def verify_root(R: RootOperator, tol: float = TOL_ALGEBRA) -> tuple[bool, float]:
    """Check ``R^m = Id``.

    Returns ``(ok, residual)`` with ``residual = ||R^m - Id||_F``.
    """
    resid = float(np.linalg.norm(R.power(R.order) - np.eye(R.dim)))
    return resid <= tol, resid


def is_isometry(R: RootOperator, tol: float = TOL_ALGEBRA) -> tuple[bool, np.ndarray | None]:
    """Check ``R^T R = Id``.

    Returns ``(True, None)`` for an isometry.  Otherwise the second item is
    a unit witness ``v`` with ``||R v|| > 1``: the canonical basis vector of
    the largest column, or the top right singular vector when every column
    has norm at most one.
    """
    mat = R.matrix
    if np.linalg.norm(mat.T @ mat - np.eye(R.dim)) <= tol:
        return True, None
    norms = np.linalg.norm(mat, axis=0)
    i = int(np.argmax(norms))
    if norms[i] > 1.0 + tol:
        witness = np.zeros(R.dim)
        witness[i] = 1.0
        return False, witness
    _, _, vt = np.linalg.svd(mat)
    return False, vt[0].copy()


def random_isometric_root(rng: np.random.Generator, n: int, m: int) -> RootOperator:
    """Random isometric root of order ``m`` on R^n.

    Block diagonal combination of planar rotations by multiples of
    ``2*pi/m`` and cyclic permutation blocks whose length divides ``m``,
    conjugated by a Haar-random orthogonal matrix.
    """
    divisors = [d for d in range(1, m + 1) if m % d == 0]
    blocks = []
    size = 0
    while size < n:
        room = n - size
        if room >= 2 and rng.random() < 0.5:
            k = int(rng.integers(0, m))
            blocks.append(rotation_root(m, k).matrix)
            size += 2
        else:
            length = int(rng.choice([d for d in divisors if d <= room]))
            blocks.append(right_shift(length, 1).matrix)
            size += length
    base = _block_diag(blocks)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    return RootOperator(q @ base @ q.T, m)


def _block_diag(blocks):
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


def root_from_dict(data) -> RootOperator:
    """Build a root from its JSON description.

    Accepted forms: ``"B1"`` or ``{"fixture": "B1"}``;
    ``{"type": "dense", "matrix": [[...]], "order": m}``;
    ``{"type": "identity", "dim": n}``;
    ``{"type": "right_shift", "m": m, "block_dim": b}``;
    ``{"type": "rotation", "m": m[, "k": k]}``;
    ``{"type": "permutation", "perm": [...][, "order": m]}``;
    ``{"type": "random_isometric", "n": n, "m": m[, "seed": s]}``.
    """
    if isinstance(data, str):
        return fixture(data)
    if not isinstance(data, dict):
        raise ValueError(f"root description must be an object or fixture name, got {type(data).__name__}")
    if "fixture" in data:
        return fixture(data["fixture"])
    kind = data.get("type")
    try:
        if kind == "dense":
            return dense_root(data["matrix"], data["order"])
        if kind == "identity":
            return identity_root(data["dim"])
        if kind == "right_shift":
            return right_shift(data["m"], data["block_dim"])
        if kind == "rotation":
            return rotation_root(data["m"], data.get("k", 1))
        if kind == "permutation":
            return permutation_root(data["perm"], data.get("order"))
        if kind == "random_isometric":
            rng = np.random.default_rng(data.get("seed", 0))
            return random_isometric_root(rng, int(data["n"]), int(data["m"]))
    except KeyError as exc:
        raise ValueError(f"root description of type {kind!r} is missing key {exc.args[0]!r}") from None
    raise ValueError(f"unknown root type {kind!r}")
