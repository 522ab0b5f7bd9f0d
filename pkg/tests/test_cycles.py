import math

import numpy as np
import pytest

from conftest import scenario_parts
from proxcycles import catalog, cycles, functions as F, roots, simons
from proxcycles.errors import PreconditionError, UnsupportedError
from proxcycles.solvers import PhantomProx, SolverConfig

A_PT = np.array([1.0, 2.0])
B_PT = np.array([-3.0, 0.5])
TIGHT = SolverConfig(tol=1e-12)


def singletons():
    f = F.DecomposableSum([F.IndicatorSingleton(A_PT), F.IndicatorSingleton(B_PT)])
    return f, simons.build(roots.right_shift(2, 2))


def lines():
    return scenario_parts("two_lines")


# closed forms
SING_D = np.concatenate([B_PT - A_PT, A_PT - B_PT])
SING_E = np.concatenate([(A_PT - B_PT) / 2, (B_PT - A_PT) / 2])
LINES_D = np.array([0.0, 1.0, 0.0, -1.0])
LINES_E = np.array([0.0, -0.5, 0.0, 0.5])


# --- find_cycle -------------------------------------------------------------------

def test_cycle_of_singletons():
    f, ops = singletons()
    c = cycles.find_cycle(f, ops)
    assert c.status == cycles.CONVERGED
    np.testing.assert_allclose(c.z, np.concatenate([A_PT, B_PT]))
    np.testing.assert_allclose(c.gap, SING_D)


def test_cycle_of_two_lines():
    f, ops = lines()
    c = cycles.find_cycle(f, ops, cfg=TIGHT)
    assert c.status == cycles.CONVERGED
    assert np.linalg.norm(c.gap - LINES_D) <= 1e-8
    t = c.z[0]
    np.testing.assert_allclose(c.z, [t, 0.0, t, 1.0], atol=1e-8)


def test_unattained_gap_has_no_classical_cycle():
    f, ops = scenario_parts("unattained_gap")
    c = cycles.find_cycle(f, ops, cfg=SolverConfig(max_iter=20_000))
    assert c.status == cycles.NO_CYCLE
    assert c.characterization["tail_min_residual"] > 1e-8 * (1 + np.linalg.norm(c.z))
    # iterates drift along the x axis
    assert c.z[0] > 10 and c.z[2] > 10


def test_find_cycle_needs_isometry():
    with pytest.raises(UnsupportedError):
        cycles.find_cycle(F.NormL1(4), roots.fixture("B1"))


def test_find_cycle_dimension_mismatch():
    with pytest.raises(ValueError):
        cycles.find_cycle(F.NormL1(3), roots.right_shift(2, 2))


# --- solve_ed ----------------------------------------------------------------------

def test_ed_with_identity_root_is_zero():
    ed = cycles.solve_ed(F.IndicatorBall([3.0, 1.0], 1.0), roots.identity_root(2))
    np.testing.assert_array_equal(ed.d, 0)
    np.testing.assert_array_equal(ed.e, 0)


def test_ed_identity_root_outside_domain():
    with pytest.raises(PreconditionError):
        cycles.solve_ed(F.LinearFn([1.0, 0.0]), roots.identity_root(2))


def test_ed_of_singletons_closed_form():
    f, ops = singletons()
    ed = cycles.solve_ed(f, ops)
    assert np.linalg.norm(ed.d - SING_D) <= 1e-6
    assert np.linalg.norm(ed.e - SING_E) <= 1e-6
    # the closed form itself: d = S e, e = Q d with Q = R / 2
    np.testing.assert_allclose(ops.S @ SING_E, SING_D)
    np.testing.assert_allclose(0.5 * ops.R.matrix @ SING_D, SING_E)


def subgradient_violation(f, ops, e, d, rng, samples=200):
    """Largest ``f*(d) + <y - d, e> - f*(y)`` over ``y`` in ``Y cap dom f*``."""
    fd = f.conjugate(d)
    worst = -math.inf
    for _ in range(samples):
        y = ops.P_Y @ (3 * rng.standard_normal(ops.dim))
        fy = f.conjugate(y)
        if fy < math.inf:
            worst = max(worst, fd + (y - d) @ e - fy)
    return worst


def test_ed_of_two_lines_closed_form(rng):
    f, ops = lines()
    ed = cycles.solve_ed(f, ops, TIGHT)
    assert np.linalg.norm(ed.d - LINES_D) <= 1e-6
    assert np.linalg.norm(ed.e - LINES_E) <= 1e-6
    # substitute the closed form: dom f* cap Y is the line spanned by d
    f_sub = subgradient_violation(f, ops, LINES_E, LINES_D, rng)
    assert f_sub <= 1e-12
    y_dir = np.array([0.0, 1.0, 0.0, -1.0])
    for s in np.linspace(-3, 3, 13):
        y = s * y_dir
        assert f.conjugate(LINES_D) + (y - LINES_D) @ LINES_E - f.conjugate(y) <= 1e-12


@pytest.mark.parametrize("sid", catalog.REGULAR)
def test_ed_pair_invariants(sid):
    f, ops = scenario_parts(sid)
    ed = cycles.solve_ed(f, ops, SolverConfig.from_dict(catalog.get(sid).get("solver")))
    res = ed.residuals
    assert res["A_e"] <= 1e-8 * (1 + np.linalg.norm(ed.e))
    assert res["A_d"] <= 1e-8 * (1 + np.linalg.norm(ed.d))
    assert res["Se_minus_d"] <= 1e-8
    assert res["Qd_minus_e"] <= 1e-8
    assert res["conjugate_at_d"] < math.inf
    assert res["inclusion"] <= 1e-6
    assert res["subgradient_inequality"] <= 1e-6


def test_ed_unique_from_random_starts(rng):
    f, ops = scenario_parts("box_and_ball")
    ref = cycles.solve_ed(f, ops)
    for _ in range(4):
        ed = cycles.solve_ed(f, ops, x0=5 * rng.standard_normal(4))
        assert np.max(np.abs(ed.d - ref.d)) <= 1e-6
        assert np.max(np.abs(ed.e - ref.e)) <= 1e-6


# --- characterization --------------------------------------------------------------

def test_characterization_of_two_lines_cycle():
    f, ops = lines()
    c = cycles.find_cycle(f, ops, cfg=TIGHT)
    ed = cycles.solve_ed(f, ops, TIGHT)
    res = cycles.check_cycle_characterization(f, ops, c.z, ed)
    assert set(res) == {"fixed_point", "fenchel", "gap_match", "phantom_value_match"}
    assert max(res.values()) <= 1e-6


def test_characterization_of_non_cycle():
    f, ops = lines()
    ed = cycles.solve_ed(f, ops, TIGHT)
    z = np.array([0.3, 2.0, -1.0, 4.0])
    res = cycles.check_cycle_characterization(f, ops, z, ed)
    assert res["fixed_point"] > 1e-3
    assert res["fenchel"] > 0
    assert res["phantom_value_match"] == math.inf   # f(z) = inf off the lines


def test_characterization_single_set_identity_root():
    C = F.IndicatorBall([2.0, -1.0], 1.0)
    R = roots.identity_root(2)
    ed = cycles.solve_ed(C, R)
    z = C.project(np.zeros(2))
    res = cycles.check_cycle_characterization(C, R, z, ed)
    assert max(res.values()) == 0.0


def test_phantom_value_identity():
    f, ops = singletons()
    # phantom of singletons is the indicator of (a, b) + Fix R; e lies in it
    assert cycles.phantom_value(f, ops, SING_E) == pytest.approx(0.0, abs=1e-12)


# --- phantom cycles --------------------------------------------------------------------

def test_phantom_of_singletons(rng):
    f, ops = singletons()
    ph = cycles.find_phantom(f, ops)
    ab = np.concatenate([A_PT, B_PT])
    assert np.linalg.norm(ph.base - ops.P_Y @ ab) <= 1e-6
    assert np.linalg.norm(ph.ed.d - SING_D) <= 1e-6
    assert ph.directions.shape == (4, 2)
    np.testing.assert_allclose(ph.directions.T @ ph.directions, np.eye(2), atol=1e-12)
    # e + Fix R equals (a, b) + Fix R
    for _ in range(5):
        z = ph.base + ph.directions @ rng.standard_normal(2)
        assert np.linalg.norm(ops.P_Y @ (z - ab)) <= 1e-6
    assert ph.cross_check["e"] <= 1e-6
    assert max(cycles.phantom_translate_residuals(f, ops, ph, samples=10, rng=1)) <= 1e-5


def test_classical_cycle_lies_in_phantom_set():
    f, ops = lines()
    c = cycles.find_cycle(f, ops, cfg=TIGHT)
    ph = cycles.find_phantom(f, ops, TIGHT)
    assert np.linalg.norm(ops.P_Y @ c.z - ph.ed.e) <= 1e-6


def test_phantom_of_unattained_gap():
    f, ops = scenario_parts("unattained_gap")
    cfg = SolverConfig.from_dict(catalog.get("unattained_gap")["solver"])
    ph = cycles.find_phantom(f, ops, cfg)
    assert np.linalg.norm(ph.ed.d) <= 1e-4


@pytest.mark.parametrize("sid", ["three_balls", "quarter_turn_ball", "affine_singleton_ball"])
def test_phantom_set_is_nonempty_affine(sid):
    f, ops = scenario_parts(sid)
    ph = cycles.find_phantom(f, ops)
    assert ph.converged
    assert max(cycles.phantom_translate_residuals(f, ops, ph, samples=10, rng=2)) <= 1e-5
    assert ph.cross_check["e"] <= 1e-6 and ph.cross_check["d"] <= 1e-6


# --- primal-dual check -----------------------------------------------------------------

@pytest.mark.parametrize("make", [singletons, lines])
def test_attouch_thera(make):
    f, ops = make()
    ed = cycles.solve_ed(f, ops, TIGHT)
    res = cycles.verify_attouch_thera(f, ops, ed)
    assert res["primal"] <= 1e-6 and res["dual"] <= 1e-6


def test_attouch_thera_identity_root():
    f = F.IndicatorBall([1.0, 1.0], 0.5)
    R = roots.identity_root(2)
    res = cycles.verify_attouch_thera(f, R, cycles.solve_ed(f, R))
    assert res == {"primal": 0.0, "dual": 0.0}


# --- minimisers ----------------------------------------------------------------------

def test_minimizer_of_intersecting_sets_is_cycle():
    f = F.DecomposableSum([F.IndicatorBall([0.0, 0.0], 1.0), F.IndicatorBall([1.0, 0.0], 1.0)])
    ops = simons.build(roots.right_shift(2, 2))
    ed = cycles.solve_ed(f, ops)
    assert np.linalg.norm(ed.d) <= 1e-6
    ok, res = cycles.minimizer_cycle_check(f, ops, ed, [0.5, 0.0, 0.5, 0.0])
    assert ok and res["fixed_point"] <= 1e-12


def test_minimizer_checks_on_two_lines():
    f, ops = lines()
    ed = cycles.solve_ed(f, ops, TIGHT)
    ok, res = cycles.minimizer_cycle_check(f, ops, ed, [0.0, 0.0, 0.0, 1.0])
    assert ok
    ok, res = cycles.minimizer_cycle_check(f, ops, ed, [5.0, 0.0, 0.0, 1.0])
    assert not ok
    assert res["fixed_point"] > 1.0


def test_minimizer_check_rejects_non_minimiser():
    f, ops = lines()
    ed = cycles.solve_ed(f, ops, TIGHT)
    with pytest.raises(PreconditionError) as info:
        cycles.minimizer_cycle_check(f, ops, ed, [0.0, 0.5, 0.0, 1.0])
    assert info.value.residual == pytest.approx(0.5)


# --- invariants --------------------------------------------------------------------------

@pytest.mark.parametrize("sid", ["two_lines", "box_and_ball", "three_balls"])
def test_gap_vector_is_shared_by_all_cycles(sid, rng):
    f, ops = scenario_parts(sid)
    gaps = []
    for _ in range(3):
        c = cycles.find_cycle(f, ops, z0=5 * rng.standard_normal(ops.dim), cfg=TIGHT)
        assert c.status == cycles.CONVERGED
        gaps.append(c.gap)
    for g in gaps[1:]:
        assert np.linalg.norm(g - gaps[0]) <= 1e-6


def test_gap_match_certifies_cycles_for_invariant_function(rng):
    f, ops = scenario_parts("invariant_hyperplane")
    ed = cycles.solve_ed(f, ops, TIGHT)
    for _ in range(10):
        z = ed.e + ops.A @ (5 * rng.standard_normal(4))
        assert np.linalg.norm(ops.S @ z - ed.d) <= 1e-8
        assert np.linalg.norm(z - f.prox(ops.R.apply(z))) <= 1e-6


def test_two_lines_gap_match_only_certifies_horizontal_translates(rng):
    # the lines are invariant under horizontal diagonal shifts only
    f, ops = lines()
    ed = cycles.solve_ed(f, ops, TIGHT)
    for _ in range(5):
        t = 5 * rng.standard_normal()
        z = np.array([t, 0.0, t, 1.0])
        assert np.linalg.norm(z - f.prox(ops.R.apply(z))) <= 1e-12
    z = ed.e + np.array([0.0, 2.0, 0.0, 2.0])
    assert np.linalg.norm(ops.S @ z - ed.d) <= 1e-6
    assert np.linalg.norm(z - f.prox(ops.R.apply(z))) > 1.0


@pytest.mark.parametrize("sid", ["two_singletons", "two_lines", "three_balls", "box_and_ball",
                                 "halfspace_and_hyperplane", "affine_singleton_ball"])
def test_indicator_cycles_satisfy_support_identity(sid):
    f, ops = scenario_parts(sid)
    c = cycles.find_cycle(f, ops, cfg=TIGHT)
    assert f(c.z) == 0.0
    sz = ops.S @ c.z
    assert abs(f.conjugate(sz) + 0.5 * sz @ sz) <= 1e-6
