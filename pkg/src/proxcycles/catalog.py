"""Built-in scenarios with known structure.

Every entry is a plain JSON-able dict in the scenario file format (see
:mod:`proxcycles.scenarios`), so the catalog doubles as a set of
examples for writing scenario files.  ``REGULAR`` lists the entries whose
``Y`` meets the relative interior of ``dom f^*``; there the inner
Douglas-Rachford converges fast.  The ``unattained_gap`` entry is the
degenerate case where the infimal distance between the two sets is zero
but not attained.
"""

from __future__ import annotations

import copy

SHIFT2 = {"type": "right_shift", "m": 2, "block_dim": 2}
SHIFT3 = {"type": "right_shift", "m": 3, "block_dim": 2}

ALL_TASKS = ["verify_ops", "find_cycle", "solve_ed", "find_phantom", "characterize", "attouch_thera"]


def _sum(*parts):
    return {"type": "sum", "parts": list(parts)}


_CATALOG = [
    {
        "id": "two_singletons",
        "root": SHIFT2,
        "function": _sum({"type": "indicator_singleton", "point": [1.0, 2.0]},
                         {"type": "indicator_singleton", "point": [-3.0, 0.5]}),
        "tasks": ALL_TASKS,
        # d = (b - a, a - b), e = ((a - b)/2, (b - a)/2)
        "expect": {"d": [-4.0, -1.5, 4.0, 1.5], "e": [2.0, 0.75, -2.0, -0.75]},
    },
    {
        "id": "two_lines",
        "root": SHIFT2,
        "function": _sum({"type": "indicator_hyperplane", "normal": [0.0, 1.0], "offset": 0.0},
                         {"type": "indicator_hyperplane", "normal": [0.0, 1.0], "offset": 1.0}),
        "tasks": ALL_TASKS,
        "solver": {"tol": 1e-12},
        "expect": {"d": [0.0, 1.0, 0.0, -1.0], "e": [0.0, -0.5, 0.0, 0.5]},
    },
    {
        "id": "three_balls",
        "root": SHIFT3,
        "function": _sum({"type": "indicator_ball", "center": [0.0, 0.0], "radius": 1.0},
                         {"type": "indicator_ball", "center": [4.0, 0.0], "radius": 1.0},
                         {"type": "indicator_ball", "center": [2.0, 3.0], "radius": 1.0}),
        "tasks": ALL_TASKS,
    },
    {
        "id": "box_and_ball",
        "root": SHIFT2,
        "function": _sum({"type": "indicator_box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]},
                         {"type": "indicator_ball", "center": [3.0, 3.0], "radius": 1.0}),
        "tasks": ALL_TASKS,
    },
    {
        "id": "halfspace_and_hyperplane",
        "root": SHIFT2,
        "function": _sum({"type": "indicator_halfspace", "normal": [1.0, 0.0], "offset": 0.0},
                         {"type": "indicator_hyperplane", "normal": [1.0, 0.0], "offset": 2.0}),
        "tasks": ALL_TASKS,
        "expect": {"d": [2.0, 0.0, -2.0, 0.0]},
    },
    {
        "id": "quadratic_and_squared_norm",
        "root": SHIFT2,
        "function": _sum({"type": "quadratic", "P": [[2.0, 0.0], [0.0, 1.0]], "b": [1.0, -1.0], "c": 0.0},
                         {"type": "squared_norm", "dim": 2, "weight": 0.5}),
        "tasks": ALL_TASKS,
    },
    {
        "id": "quarter_turn_ball",
        "root": {"type": "rotation", "m": 4, "k": 1},
        "function": {"type": "indicator_ball", "center": [2.0, 1.0], "radius": 1.0},
        "tasks": ALL_TASKS,
    },
    {
        "id": "l1_ball_random_root",
        "root": {"type": "random_isometric", "n": 6, "m": 4, "seed": 3},
        "function": _sum({"type": "norm_l1", "dim": 3},
                         {"type": "indicator_ball", "center": [2.0, 0.0, -1.0], "radius": 1.0}),
        "tasks": ALL_TASKS,
    },
    {
        "id": "linear_rotation",
        "root": {"type": "rotation", "m": 3, "k": 1},
        "function": {"type": "linear", "slope": [1.0, -2.0]},
        "tasks": ALL_TASKS,
        # dom f* is a single point, so the Fenchel check needs a tight cycle
        "solver": {"tol": 1e-12},
    },
    {
        "id": "affine_singleton_ball",
        "root": SHIFT3,
        "function": _sum({"type": "indicator_affine", "basepoint": [0.0, 1.0], "spanning": [[1.0, 1.0]]},
                         {"type": "indicator_singleton", "point": [3.0, 0.0]},
                         {"type": "indicator_ball", "center": [0.0, -2.0], "radius": 0.5}),
        "tasks": ALL_TASKS,
    },
    {
        "id": "invariant_hyperplane",
        "root": SHIFT2,
        # a_y - b_y = -1 on (R^2)^2: invariant under every shift along Fix R
        "function": {"type": "indicator_hyperplane", "normal": [0.0, 1.0, 0.0, -1.0], "offset": -1.0},
        "tasks": ALL_TASKS,
        "expect": {"d": [0.0, 1.0, 0.0, -1.0], "e": [0.0, -0.5, 0.0, 0.5]},
    },
    {
        "id": "unattained_gap",
        "root": SHIFT2,
        "function": _sum({"type": "indicator_hyperbola_epigraph"},
                         {"type": "indicator_halfspace", "normal": [0.0, 1.0], "offset": 0.0}),
        "tasks": ["verify_ops", "find_cycle", "find_phantom"],
        "solver": {"tol": 1e-6, "max_iter": 100000, "inner_tol": 1e-7, "inner_max_iter": 2000},
        "tol": 1e-4,
        "expect": {"find_cycle": "NoCycleDetected", "d": [0.0, 0.0, 0.0, 0.0]},
    },
]

REGULAR = [s["id"] for s in _CATALOG if s["id"] != "unattained_gap"]


def catalog() -> list[dict]:
    """Deep copies of all built-in scenario dicts."""
    return copy.deepcopy(_CATALOG)


def get(scenario_id: str) -> dict:
    for s in _CATALOG:
        if s["id"] == scenario_id:
            return copy.deepcopy(s)
    raise KeyError(f"no built-in scenario {scenario_id!r}")
