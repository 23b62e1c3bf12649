import itertools
import math

import numpy as np
import pytest

from hotpursuit.controllers import (EVADER, PURSUER, ValueGrid,
                                    evader_escape_control,
                                    evader_weakest_link, hji_update,
                                    hungarian_assign, hybrid_cost_matrix,
                                    pursuer_hybrid_control,
                                    pursuer_intercept_heading,
                                    upwind_gradient, weakest_link_pair)
from hotpursuit.world import AgentState


# ---------------------------------------------------------------------------
# weakest link
# ---------------------------------------------------------------------------

def _weakest_link_oracle(evader_pos, pursuer_positions):
    """Independent re-derivation: plain-math scan over ordered pairs."""
    n = len(pursuer_positions)
    d, lam, phi = [], [], []
    for px, py in pursuer_positions:
        dist = math.hypot(px - evader_pos[0], py - evader_pos[1])
        d.append(dist)
        lam.append(math.atan2(py - evader_pos[1], px - evader_pos[0]))
        if dist ** 2 > 1:
            arg = (1 - dist ** 2) / (2 * dist)
            phi.append(math.acos(max(-1.0, min(1.0, arg))))
        else:
            phi.append(0.0)
    best, best_theta = None, math.inf
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            gap = (lam[i] - lam[j]) % (2 * math.pi)
            theta = phi[i] + phi[j] - gap
            if theta < best_theta - 1e-12:
                best_theta, best = theta, (i, j)
    i, j = best
    g_i = math.sqrt(max(d[i] ** 2 - 2, 1e-6))
    g_j = math.sqrt(max(d[j] ** 2 - 2, 1e-6))
    psi_s = (math.cos(lam[j]) - math.sin(lam[j]) / g_j) / d[j] \
        - (math.cos(lam[i]) + math.sin(lam[i]) / g_i) / d[i]
    psi_c = (math.sin(lam[i]) - math.cos(lam[i]) / g_i) / d[i] \
        - (math.sin(lam[j]) + math.cos(lam[j]) / g_j) / d[j]
    return best, math.atan2(psi_s, psi_c)


def test_weakest_link_requires_two_pursuers():
    with pytest.raises(ValueError):
        evader_weakest_link(AgentState.at(0, 0), [AgentState.at(1, 0)])


def test_weakest_link_east_west_hand_case():
    # d_i = 3 on both sides: the unique pair, heading from the closed form.
    evader = AgentState.at(0, 0)
    pursuers = [AgentState.at(3, 0), AgentState.at(-3, 0)]
    heading = evader_weakest_link(evader, pursuers)
    assert math.isfinite(heading)
    _, expected = _weakest_link_oracle((0, 0), [(3, 0), (-3, 0)])
    assert heading == pytest.approx(expected, abs=1e-12)
    # hand evaluation: psi_c = 0 and psi_s = -2/3 => heading -pi/2
    assert heading == pytest.approx(-math.pi / 2, abs=1e-12)


def test_weakest_link_mirror_symmetry():
    # Reflecting the pursuers about the y-axis negates the heading's
    # x-component (zero in the symmetric scene).
    evader = AgentState.at(0, 0)
    a = 3 / math.sqrt(2)
    original = [AgentState.at(a, a), AgentState.at(-a, a)]
    reflected = [AgentState.at(-a, a), AgentState.at(a, a)]
    h_orig = evader_weakest_link(evader, original)
    h_refl = evader_weakest_link(evader, reflected)
    assert math.cos(h_refl) == pytest.approx(-math.cos(h_orig), abs=1e-12)
    assert abs(math.cos(h_orig)) < 1e-12


def test_weakest_link_argmin_matches_pair_enumeration():
    rng = np.random.default_rng(42)
    for _ in range(30):
        evader_pos = rng.uniform(-0.3, 0.3, 2)
        positions = rng.uniform(-1, 1, (rng.integers(2, 6), 2))
        pair, heading = _weakest_link_oracle(tuple(evader_pos),
                                             [tuple(p) for p in positions])
        pursuers = [AgentState.at(*p) for p in positions]
        i, j, _ = weakest_link_pair(AgentState.at(*evader_pos), pursuers)
        assert (i, j) == pair
        assert evader_weakest_link(AgentState.at(*evader_pos), pursuers) \
            == pytest.approx(heading, abs=1e-9)


def test_weakest_link_argmin_rotation_invariant():
    rng = np.random.default_rng(7)
    for _ in range(25):
        evader_pos = rng.uniform(-0.2, 0.2, 2)
        positions = rng.uniform(-1, 1, (4, 2))
        angle = rng.uniform(0, 2 * np.pi)
        rot = np.array([[np.cos(angle), -np.sin(angle)],
                        [np.sin(angle), np.cos(angle)]])
        base = weakest_link_pair(
            AgentState.at(*evader_pos),
            [AgentState.at(*p) for p in positions])[:2]
        rotated = weakest_link_pair(
            AgentState.at(*(rot @ evader_pos)),
            [AgentState.at(*(rot @ p)) for p in positions])[:2]
        assert base == rotated


# ---------------------------------------------------------------------------
# intercept heading
# ---------------------------------------------------------------------------

def test_intercept_heading_hand_case():
    # gamma=2, rho=0: offset x = 2*1/(1-4) = -2/3, so the heading is pi.
    heading = pursuer_intercept_heading(AgentState.at(0, 0),
                                        AgentState.at(1, 0), 2.0, 0.0)
    assert heading == pytest.approx(math.pi)


def test_intercept_heading_axis_symmetry():
    heading = pursuer_intercept_heading(AgentState.at(0, 0),
                                        AgentState.at(0, 0.7), 2.0, 0.0)
    assert abs(heading) == pytest.approx(math.pi / 2)


def test_intercept_heading_translation_invariant():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = rng.uniform(-0.5, 0.5, 2)
        e = rng.uniform(-0.5, 0.5, 2)
        shift = rng.uniform(-0.4, 0.4, 2)
        base = pursuer_intercept_heading(AgentState.at(*p),
                                         AgentState.at(*e), 2.0, 0.1)
        moved = pursuer_intercept_heading(AgentState.at(*(p + shift)),
                                          AgentState.at(*(e + shift)), 2.0, 0.1)
        assert moved == pytest.approx(base, abs=1e-12)


def test_intercept_heading_singular_ratio():
    with pytest.raises(ValueError):
        pursuer_intercept_heading(AgentState.at(0, 0), AgentState.at(1, 0),
                                  1.0, 0.1)


# ---------------------------------------------------------------------------
# value grid and upwind scheme
# ---------------------------------------------------------------------------

def _grid_from_function(fn, resolution=11):
    coords = np.linspace(-1, 1, resolution)
    values = np.array([[fn(x, y) for y in coords] for x in coords])
    return ValueGrid(values)


def test_value_grid_validation():
    with pytest.raises(ValueError):
        ValueGrid(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ValueGrid(np.full((5, 5), np.nan))
    grid = ValueGrid(np.zeros((5, 5)))
    assert grid.spacing == pytest.approx(2 / 4)


def test_value_grid_bilinear_interpolation():
    grid = _grid_from_function(lambda x, y: 2 * x + 3 * y, resolution=5)
    # bilinear interpolation reproduces affine fields exactly
    assert grid.interpolate([0.13, -0.41]) == pytest.approx(
        2 * 0.13 + 3 * -0.41, abs=1e-12)


def test_value_grid_csv_round_trip(tmp_path):
    grid = ValueGrid.distance_field([[0.3, -0.2]], 0.1, resolution=9)
    path = tmp_path / "grid.csv"
    grid.to_csv(path)
    loaded = ValueGrid.from_csv(path)
    assert np.array_equal(loaded.values, grid.values)


def test_upwind_gradient_linear_field():
    grid = _grid_from_function(lambda x, y: x)
    for role in (PURSUER, EVADER):
        gx, gy = upwind_gradient(grid, (5, 5), role)
        assert gx == pytest.approx(1.0)
        assert gy == pytest.approx(0.0, abs=1e-12)


def test_upwind_gradient_kink_selection():
    grid = _grid_from_function(lambda x, y: abs(x))
    kink = (grid.resolution - 1) // 2  # x = 0 sits on a node
    gx_p, _ = upwind_gradient(grid, (kink, 3), PURSUER)
    gx_e, _ = upwind_gradient(grid, (kink, 3), EVADER)
    assert gx_p == pytest.approx(-1.0)
    assert gx_e == pytest.approx(1.0)


def test_upwind_gradient_constant_and_boundary():
    grid = _grid_from_function(lambda x, y: 0.0)
    assert upwind_gradient(grid, (4, 4), PURSUER) == (0.0, 0.0)
    ramp = _grid_from_function(lambda x, y: x)
    # left boundary: only the forward difference exists, both roles use it
    assert upwind_gradient(ramp, (0, 5), PURSUER)[0] == pytest.approx(1.0)
    assert upwind_gradient(ramp, (0, 5), EVADER)[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        upwind_gradient(grid, (4, 4), "referee")


def test_hji_update_constant_grid_unchanged():
    grid = ValueGrid(np.full((9, 9), 0.37))
    out = hji_update(grid, 0.05, 1.0, 0.5)
    assert np.allclose(out.values, grid.values)


def test_hji_update_rejects_cfl_violation():
    grid = ValueGrid(np.zeros((5, 5)))  # spacing 0.5
    with pytest.raises(ValueError):
        hji_update(grid, 0.6, 1.0, 0.0)


def test_hji_update_eikonal_hand_check():
    # Distance cone around the centre of a 5x5 grid, v_E = 0: cells with a
    # clean unit gradient drop by exactly v_P * dt.
    grid = ValueGrid.distance_field([[0.0, 0.0]], 0.1, resolution=5)
    dt, v_p = 0.3, 1.0
    out = hji_update(grid, dt, v_p, 0.0)
    drops = grid.values - out.values
    # axis-aligned interior cells see |grad| = 1 exactly
    assert drops[3, 2] == pytest.approx(v_p * dt, abs=1e-12)
    assert drops[1, 2] == pytest.approx(v_p * dt, abs=1e-12)
    assert drops[2, 3] == pytest.approx(v_p * dt, abs=1e-12)
    assert np.all(drops >= -1e-12)


def test_hji_update_stable_over_100_steps():
    grid = ValueGrid.distance_field([[0.2, -0.1]], 0.1, resolution=21)
    peak = np.abs(grid.values).max()
    for _ in range(100):
        grid = hji_update(grid, 0.05, 1.0, 0.0)
        new_peak = np.abs(grid.values).max()
        assert new_peak <= peak + 1e-12
        peak = new_peak


def test_hji_update_symmetric_speeds_near_cancellation():
    grid = ValueGrid.distance_field([[0.0, 0.0]], 0.1, resolution=21)
    out = hji_update(grid, 0.05, 1.0, 1.0)
    assert np.abs(out.values - grid.values).max() <= grid.spacing + 1e-9


# ---------------------------------------------------------------------------
# cost matrix and assignment
# ---------------------------------------------------------------------------

def _states(rows):
    return [AgentState.at(*r) for r in rows]


def test_cost_matrix_geometric_limit():
    grid = ValueGrid.distance_field([[0.0, 0.0]], 0.1, resolution=11)
    pursuers = _states([(0.5, 0.5), (-0.5, 0.0)])
    evaders = _states([(0.0, 0.0), (0.25, -0.25)])
    cost = hybrid_cost_matrix(pursuers, evaders, grid, alpha=1.0)
    expected = np.array([[np.linalg.norm(p.position - e.position)
                          for e in evaders] for p in pursuers])
    assert np.allclose(cost, expected)


def test_cost_matrix_value_only_limit():
    grid = ValueGrid.distance_field([[0.3, 0.3]], 0.1, resolution=11)
    pursuers = _states([(0.5, 0.5), (-0.5, 0.0), (0.1, -0.7)])
    evaders = _states([(0.0, 0.0), (0.25, -0.25)])
    cost = hybrid_cost_matrix(pursuers, evaders, grid, alpha=0.0)
    assert np.allclose(cost, cost[0])  # columns constant per evader


def test_cost_matrix_blend_hand_case():
    # Hand-set affine grid: interpolation is exact, so the blended entries
    # can be recomputed with plain arithmetic.
    grid = _grid_from_function(lambda x, y: x, resolution=5)
    pursuers = _states([(-0.5, 0.0), (0.5, 0.0)])
    evaders = _states([(-0.25, 0.0), (0.75, 0.0)])
    dists = np.array([[0.25, 1.25], [0.75, 0.25]])
    values = np.array([-0.25, 0.75])
    lo, hi = dists.min(), dists.max()
    scaled = lo + (values - values.min()) / (values.max() - values.min()) \
        * (hi - lo)
    expected = 0.5 * dists + 0.5 * scaled[None, :]
    cost = hybrid_cost_matrix(pursuers, evaders, grid, alpha=0.5)
    assert np.allclose(cost, expected, atol=1e-12)


def test_cost_matrix_rejects_bad_input():
    grid = ValueGrid(np.zeros((5, 5)))
    with pytest.raises(ValueError):
        hybrid_cost_matrix(_states([(0, 0)]), [], grid, 0.5)
    with pytest.raises(ValueError):
        hybrid_cost_matrix(_states([(0, 0)]), _states([(1, 1)]), grid, 1.5)


def _brute_force_min_cost(cost):
    n = cost.shape[0]
    return min(sum(cost[i, p[i]] for i in range(n))
               for p in itertools.permutations(range(cost.shape[1]), n))


def test_hungarian_identity_cheap():
    cost = np.ones((3, 3)) - np.eye(3)
    out = hungarian_assign(cost)
    assert out.targets == [0, 1, 2]
    assert out.total_cost == pytest.approx(0.0)


def test_hungarian_matches_permutation_enumeration():
    rng = np.random.default_rng(11)
    for size in (4, 5, 6):
        for _ in range(25):
            cost = rng.integers(0, 50, size=(size, size)).astype(float)
            out = hungarian_assign(cost)
            assert sorted(out.targets) == list(range(size))
            assert out.total_cost == pytest.approx(
                _brute_force_min_cost(cost))


def test_hungarian_surplus_pursuers():
    cost = np.array([[1.0, 5.0],
                     [4.0, 0.5],
                     [2.0, 9.0]])
    out = hungarian_assign(cost)
    assert set(out.targets) == {0, 1}          # both evaders covered
    # brute force over size-2 matchings plus greedy surplus
    best = None
    for rows in itertools.permutations(range(3), 2):
        matched = cost[rows[0], 0] + cost[rows[1], 1]
        surplus = [i for i in range(3) if i not in rows]
        total = matched + sum(cost[i].min() for i in surplus)
        best = total if best is None else min(best, total)
    assert out.total_cost == pytest.approx(best)
    assert out.total_cost == pytest.approx(
        sum(cost[i, t] for i, t in enumerate(out.targets)))


def test_hungarian_rejects_nan():
    with pytest.raises(ValueError):
        hungarian_assign(np.array([[1.0, np.nan], [0.0, 2.0]]))


# ---------------------------------------------------------------------------
# hybrid controls
# ---------------------------------------------------------------------------

def test_pursuer_hybrid_control_pure_geometric():
    grid = ValueGrid.distance_field([[0.5, 0.5]], 0.1, resolution=11)
    u = pursuer_hybrid_control(AgentState.at(0, 0), AgentState.at(0.6, 0.8),
                               grid, alpha=1.0)
    assert np.allclose(u, [0.6, 0.8])


def test_pursuer_hybrid_control_equal_terms():
    # A linear ramp makes the descent direction (-1, 0); chase a target due
    # west so both terms agree, for any alpha.
    grid = _grid_from_function(lambda x, y: x)
    pursuer = AgentState.at(0.2, 0.0)
    target = AgentState.at(-0.6, 0.0)
    for alpha in (0.0, 0.3, 1.0):
        u = pursuer_hybrid_control(pursuer, target, grid, alpha=alpha)
        assert np.allclose(u, [-1.0, 0.0], atol=1e-12)


def test_pursuer_hybrid_control_orthogonal_blend():
    # Descent of the ramp points west; choose the target north so the blend
    # of (0, 1) and (-1, 0)... use a ramp increasing to the east and a target
    # due north: u = ((0,1) + (-1,0)) / sqrt(2) at alpha = 0.5.
    grid = _grid_from_function(lambda x, y: x)
    u = pursuer_hybrid_control(AgentState.at(0.0, 0.0),
                               AgentState.at(0.0, 0.5), grid, alpha=0.5)
    assert np.allclose(u, np.array([-1.0, 1.0]) / np.sqrt(2), atol=1e-12)


def test_pursuer_hybrid_control_degenerate_cancellation():
    # Gradient descent due west, target due east, alpha = 0.5: zero vector.
    grid = _grid_from_function(lambda x, y: x)
    u = pursuer_hybrid_control(AgentState.at(0.0, 0.0),
                               AgentState.at(0.5, 0.0), grid, alpha=0.5)
    assert np.allclose(u, [0.0, 0.0])
    # and on the target itself
    u = pursuer_hybrid_control(AgentState.at(0.1, 0.1),
                               AgentState.at(0.1, 0.1), grid, alpha=0.7)
    assert np.allclose(u, [0.0, 0.0])


def test_evader_escape_flees_nearby_pursuer():
    grid = ValueGrid(np.zeros((11, 11)))
    u = evader_escape_control(AgentState.at(0.0, 0.0),
                              [AgentState.at(-0.2, 0.0)], grid,
                              avoid_radius=0.3)
    assert np.allclose(u, [1.0, 0.0])


def test_evader_escape_symmetric_pursuers_cancel():
    grid = ValueGrid(np.zeros((11, 11)))
    u = evader_escape_control(
        AgentState.at(0.0, 0.0),
        [AgentState.at(0.1, 0.2), AgentState.at(0.1, -0.2)], grid,
        avoid_radius=0.5)
    assert u[1] == pytest.approx(0.0, abs=1e-12)
    assert u[0] == pytest.approx(-1.0)


def test_evader_escape_matches_direct_summation():
    # Pursuers at distance d and 2d on opposite sides: the hand-summed
    # avoidance vector drives the control.
    d = 0.15
    grid = ValueGrid(np.zeros((11, 11)))
    evader = AgentState.at(0.0, 0.0)
    pursuers = [AgentState.at(-d, 0.0), AgentState.at(2 * d, 0.0)]
    u = evader_escape_control(evader, pursuers, grid, avoid_radius=0.5)
    hand = np.array([1.0 / d - 1.0 / (2 * d), 0.0])  # sum of diff/|diff|^2
    assert np.allclose(u, hand / np.linalg.norm(hand), atol=1e-12)
    # out-of-radius pursuers contribute nothing
    u_near_only = evader_escape_control(evader, pursuers, grid,
                                        avoid_radius=0.2)
    assert np.allclose(u_near_only, [1.0, 0.0])


def test_evader_escape_coincident_pursuer_is_finite():
    grid = ValueGrid(np.zeros((11, 11)))
    u = evader_escape_control(AgentState.at(0.0, 0.0),
                              [AgentState.at(0.0, 0.0)], grid,
                              avoid_radius=0.5)
    assert np.all(np.isfinite(u))


def test_control_norms_are_zero_or_one():
    rng = np.random.default_rng(21)
    grid = ValueGrid.distance_field([[0.1, -0.3]], 0.1, resolution=21)
    for _ in range(40):
        p = AgentState.at(*rng.uniform(-1, 1, 2))
        t = AgentState.at(*rng.uniform(-1, 1, 2))
        u = pursuer_hybrid_control(p, t, grid, alpha=rng.uniform(0, 1))
        norm = np.linalg.norm(u)
        assert norm == pytest.approx(0.0, abs=1e-9) \
            or norm == pytest.approx(1.0, abs=1e-9)
        e = AgentState.at(*rng.uniform(-1, 1, 2))
        others = [AgentState.at(*rng.uniform(-1, 1, 2)) for _ in range(3)]
        v = evader_escape_control(e, others, grid, avoid_radius=0.3)
        norm = np.linalg.norm(v)
        assert norm == pytest.approx(0.0, abs=1e-9) \
            or norm == pytest.approx(1.0, abs=1e-9)
