import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import scenario_parts
from proxcycles import functions as F, roots, simons
from proxcycles.errors import DivergenceError
from proxcycles.solvers import (LinearResolvent, PhantomProx, SolverConfig, SolveTrace,
                                douglas_rachford, km_fixed_point, marginal_prox, prox_phantom,
                                resolvent_linear)

CFG = SolverConfig()


def proj_line(direction):
    d = np.asarray(direction, float) / np.linalg.norm(direction)
    return lambda x: d * (d @ x)


# --- Krasnosel'skii-Mann --------------------------------------------------------

def test_km_constant_map():
    c = np.array([1.0, -2.0])
    z, trace = km_fixed_point(lambda x: c, np.zeros(2), CFG.with_(relaxation=1.0))
    assert trace.converged and trace.iterations <= 2
    np.testing.assert_allclose(z, c)


def test_km_alternating_line_projections():
    p1, p2 = proj_line([1.0, 0.0]), proj_line([1.0, 1.0])
    z, trace = km_fixed_point(lambda x: p1(p2(x)), np.array([1.0, 1.0]), CFG)
    assert trace.converged
    assert np.linalg.norm(z) <= 1e-7


def test_km_averaged_rotation():
    R = roots.rotation_root(4).matrix
    z, trace = km_fixed_point(lambda x: R @ x, np.array([1.0, 2.0]), CFG)
    assert trace.converged
    assert np.linalg.norm(z) <= 1e-7
    # plain iteration only cycles
    _, plain = km_fixed_point(lambda x: R @ x, np.array([1.0, 2.0]), CFG.with_(relaxation=1.0, max_iter=100))
    assert not plain.converged


def test_km_divergence_detected():
    with pytest.raises(DivergenceError) as info:
        km_fixed_point(lambda x: 2.0 * x + 1.0, np.zeros(3), CFG.with_(relaxation=1.0))
    assert info.value.trace.iterations > 0
    assert np.all(np.isfinite(info.value.last))


def test_km_fejer_monotone_towards_fixed_point(rng):
    # projections onto a ball and a halfspace through the origin share z* = 0
    ball = F.IndicatorBall([0.5, 0.0], 1.0)
    half = F.IndicatorHalfspace([1.0, 1.0], 0.0)

    def T(x):
        return ball.prox(half.prox(x))

    for _ in range(5):
        z0 = 4 * rng.standard_normal(2)
        dists = [np.linalg.norm(z0)]
        km_fixed_point(T, z0, CFG, callback=lambda k, z: dists.append(np.linalg.norm(z)))
        assert len(dists) > 1
        assert all(b <= a + 1e-12 for a, b in zip(dists, dists[1:]))


def test_trace_csv(tmp_path):
    t = SolveTrace(iterations=2, residual_history=[0.5, 0.25], converged=True)
    path = tmp_path / "t.csv"
    t.to_csv(path)
    assert path.read_text().splitlines() == ["iteration,residual", "1,0.5", "2,0.25"]


def test_solver_config_from_dict():
    cfg = SolverConfig.from_dict({"tol": 1e-6, "max_iter": 10})
    assert cfg.tol == 1e-6 and cfg.max_iter == 10 and cfg.relaxation == 0.5
    assert SolverConfig.from_dict(None) == SolverConfig()
    for bad in ({"relaxation": 1.5}, {"tol": 0}, {"bogus": 1}):
        with pytest.raises((ValueError, TypeError)):
            SolverConfig.from_dict(bad)


# --- Douglas-Rachford -------------------------------------------------------------

def test_dr_singleton_plus_zero():
    a = np.array([2.0, -1.0])
    u, trace, _ = douglas_rachford(lambda x, g: a, lambda x, g: x, np.zeros(2), CFG)
    assert trace.converged
    np.testing.assert_allclose(u, a)


def test_dr_square_plus_singleton():
    a = np.array([2.0, -1.0])
    u, trace, _ = douglas_rachford(lambda x, g: x / (1 + g), lambda x, g: a, np.ones(2), CFG)
    assert trace.converged
    np.testing.assert_allclose(u, a)


def test_dr_parallel_lines_stall():
    l0 = F.IndicatorHyperplane([0.0, 1.0], 0.0)
    l1 = F.IndicatorHyperplane([0.0, 1.0], 1.0)
    u, trace, x = douglas_rachford(lambda v, g: l0.prox(v), lambda v, g: l1.prox(v), np.zeros(2),
                                   CFG.with_(max_iter=500))
    assert not trace.converged
    assert trace.residual_history[-1] == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dr_shadow_solves_inclusion(seed):
    # 0 in N_C(u) + u - p  has the unique zero u = P_C p
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    C = F.IndicatorBall(rng.standard_normal(n), float(rng.uniform(0.1, 2.0)))
    p = 3 * rng.standard_normal(n)
    cfg = CFG.with_(dr_step=float(rng.uniform(0.2, 3.0)))
    u, trace, _ = douglas_rachford(lambda x, g: C.prox(x), lambda x, g: (x + g * p) / (1 + g),
                                   rng.standard_normal(n), cfg)
    assert trace.converged
    assert np.linalg.norm(u - C.project(p)) <= 1e-6


# --- linear resolvents --------------------------------------------------------------

def test_resolvent_linear_examples(rng):
    v = rng.standard_normal(3)
    np.testing.assert_allclose(resolvent_linear(np.zeros((3, 3)), 0.7, v), v)
    np.testing.assert_allclose(resolvent_linear(np.eye(3), 1.0, v), v / 2)
    ops = simons.build(roots.right_shift(2, 1))
    for lam in (0.5, 1.0, 3.0):
        u = resolvent_linear(ops.M, lam, v[:2])
        assert np.linalg.norm(u + lam * ops.M @ u - v[:2]) <= 1e-12


def test_resolvent_linear_guards():
    with pytest.raises(ValueError):
        LinearResolvent(-np.eye(2))
    with pytest.raises(ValueError):
        resolvent_linear(np.eye(2), 0.0, np.ones(2))


# --- phantom prox ----------------------------------------------------------------

def affine_projector(point, ops):
    """Projection onto ``point + Fix R``."""
    return lambda x: point + ops.A @ (x - point)


def test_phantom_prox_of_invariant_function_is_its_prox(rng):
    f, ops = scenario_parts("invariant_hyperplane")
    prox = PhantomProx(f, ops)
    for _ in range(10):
        x = 3 * rng.standard_normal(4)
        assert np.linalg.norm(prox(x) - f.prox(x)) <= 1e-7 * (1 + np.linalg.norm(x))


def test_phantom_prox_of_two_lines_is_hyperplane_projection(rng):
    # closing the lines under Fix R translations leaves {a_y - b_y = -1}
    f, ops = scenario_parts("two_lines")
    plane = F.IndicatorHyperplane([0.0, 1.0, 0.0, -1.0], -1.0)
    prox = PhantomProx(f, ops)
    for _ in range(10):
        x = 3 * rng.standard_normal(4)
        assert np.linalg.norm(prox(x) - plane.prox(x)) <= 1e-7 * (1 + np.linalg.norm(x))


def test_phantom_prox_of_singletons_is_affine_projection(rng):
    f, ops = scenario_parts("two_singletons")
    ab = np.concatenate([p.point for p in f.parts])
    P = affine_projector(ab, ops)
    prox = PhantomProx(f, ops)
    for step in (0.5, 1.0, 2.0):
        x = 3 * rng.standard_normal(4)
        assert np.linalg.norm(prox(x, step) - P(x)) <= 1e-7 * (1 + np.linalg.norm(x))


def test_phantom_prox_with_trivial_y(rng):
    ops = simons.build(roots.identity_root(2))
    x = rng.standard_normal(2)
    np.testing.assert_array_equal(prox_phantom(F.IndicatorBall([5.0, 0.0], 1.0), ops, x), x)


def test_phantom_prox_with_trivial_fix(rng):
    ops = simons.build(roots.rotation_root(3))
    f = F.IndicatorBall([5.0, 0.0], 1.0)
    x = rng.standard_normal(2)
    np.testing.assert_allclose(prox_phantom(f, ops, x), f.prox(x))


def test_phantom_prox_rejects_non_isometric():
    from proxcycles.errors import UnsupportedError
    with pytest.raises(UnsupportedError):
        PhantomProx(F.NormL1(4), simons.build(roots.fixture("B2")))


def test_phantom_prox_firmly_nonexpansive(rng):
    f, ops = scenario_parts("box_and_ball")
    prox = PhantomProx(f, ops)
    for _ in range(50):
        x, y = 4 * rng.standard_normal(4), 4 * rng.standard_normal(4)
        px, py = prox(x), prox(y)
        assert (px - py) @ (px - py) <= (px - py) @ (x - y) + 1e-7 * (1 + np.linalg.norm(x - y))


@pytest.mark.parametrize("sid", ["three_balls", "box_and_ball", "two_singletons"])
def test_phantom_prox_commutes_with_fix_translations(sid, rng):
    f, ops = scenario_parts(sid)
    prox = PhantomProx(f, ops)
    for _ in range(50):
        x = 3 * rng.standard_normal(ops.dim)
        w = ops.A @ (3 * rng.standard_normal(ops.dim))
        assert np.linalg.norm(prox(x + w) - prox(x) - w) <= 1e-6 * (1 + np.linalg.norm(x) + np.linalg.norm(w))


def test_phantom_construction_is_idempotent(rng):
    f, ops = scenario_parts("two_singletons")
    ab = np.concatenate([p.point for p in f.parts])
    # the phantom of the singletons in closed form: indicator of (a, b) + Fix R
    closed = F.IndicatorAffine(ab, ops.fix_basis().T)
    once, twice = PhantomProx(f, ops), PhantomProx(closed, ops)
    for _ in range(20):
        x = 3 * rng.standard_normal(4)
        assert np.linalg.norm(twice(x) - once(x)) <= 1e-7 * (1 + np.linalg.norm(x))
        assert np.linalg.norm(closed.prox(x) - once(x)) <= 1e-7 * (1 + np.linalg.norm(x))


def test_conj_prox_is_prox_of_conjugate_plus_subspace(rng):
    # f = singletons: f* + iota_Y is linear on Y, its prox is P_Y(v - t (a, b))
    f, ops = scenario_parts("two_singletons")
    ab = np.concatenate([p.point for p in f.parts])
    prox = PhantomProx(f, ops)
    for t in (0.5, 1.0, 2.0):
        v = 3 * rng.standard_normal(4)
        assert np.linalg.norm(prox.conj_prox(v, t) - ops.P_Y @ (v - t * ab)) <= 1e-7 * (1 + np.linalg.norm(v))


def _gap_phantom_projection(x):
    # cl(C1 - C2) is the upper half plane, so the phantom set is {a_y - b_y >= 0}
    a = np.array([0.0, 1.0, 0.0, -1.0])
    return x - min(0.0, a @ x) / 2.0 * a


def test_marginal_prox_on_unattained_gap(rng):
    f, ops = scenario_parts("unattained_gap")
    for _ in range(6):
        x = 3 * rng.standard_normal(4)
        z, trace = marginal_prox(f, ops.P_Y, x, 1.0, tol=1e-7, max_iter=2000)
        assert trace.converged
        assert np.linalg.norm(z - _gap_phantom_projection(x)) <= 1e-5


def test_phantom_prox_falls_back_when_inner_dr_stalls():
    f, ops = scenario_parts("unattained_gap")
    prox = PhantomProx(f, ops, SolverConfig(inner_tol=1e-7, inner_max_iter=2000))
    x = np.array([1.0, -2.0, 0.5, 1.0])
    z = prox(x)
    assert prox.method == "marginal"
    assert np.linalg.norm(z - _gap_phantom_projection(x)) <= 1e-5


def test_marginal_prox_agrees_with_dr_on_regular_case(rng):
    f, ops = scenario_parts("three_balls")
    prox = PhantomProx(f, ops)
    for _ in range(5):
        x = 3 * rng.standard_normal(ops.dim)
        z, trace = marginal_prox(f, ops.P_Y, x, 1.0, tol=1e-10)
        assert trace.converged
        assert np.linalg.norm(z - prox(x)) <= 1e-6
