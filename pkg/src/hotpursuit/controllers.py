"""Control laws for both game kinds.

One-vs-many: the evader probes every ordered pursuer pair for the "weakest
link" (the pair whose coverage arcs leave the widest angular opening) and
heads through it; each pursuer steers toward an interception aim point built
from the speed ratio.

Many-vs-many: a hybrid controller. A value function on a grid over the arena
is advanced one Hamilton-Jacobi-Isaacs step per simulation step; pursuers are
matched to evaders with the Hungarian algorithm on a cost that blends
Euclidean distance with interpolated grid values, then steer along a blend of
the direct geometric direction and the descent direction of the grid. Evaders
climb the value function while being pushed away from nearby pursuers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .world import WORLD_MAX, WORLD_MIN, MANY_VS_MANY

TWO_PI = 2.0 * math.pi

PURSUER = "pursuer"
EVADER = "evader"

DEFAULT_GRID_RESOLUTION = 41
DEFAULT_BLEND_WEIGHT = 0.5  # alpha: geometric vs value-gradient share


# ---------------------------------------------------------------------------
# One evader vs. many pursuers
# ---------------------------------------------------------------------------

def _pair_geometry(evader_position, pursuer_positions):
    """Distances, line-of-sight angles and coverage half-angles per pursuer."""
    offsets = pursuer_positions - evader_position
    dists = np.maximum(np.linalg.norm(offsets, axis=1), 1e-9)
    los = np.arctan2(offsets[:, 1], offsets[:, 0])
    # Coverage half-angle: arccos((1 - d^2) / 2d) for d^2 > 1, else 0. The
    # argument leaves [-1, 1] once d > 1 + sqrt(2), so it is clamped.
    phi = np.zeros_like(dists)
    far = dists ** 2 > 1.0
    arg = np.clip((1.0 - dists[far] ** 2) / (2.0 * dists[far]), -1.0, 1.0)
    phi[far] = np.arccos(arg)
    return dists, los, phi


def weakest_link_pair(evader, pursuers):
    """Ordered pursuer pair (i, j) minimising the link angle, plus the angle.

    The link angle of ordered pair (i, j) is phi_i + phi_j - gap(i, j) where
    gap is the bearing difference lambda_i - lambda_j wrapped into [0, 2*pi).
    Wrapping keeps the argmin invariant under rotation of the whole scene;
    scanning ordered pairs picks the orientation with the widest opening.
    """
    if len(pursuers) < 2:
        raise ValueError("weakest link needs at least two pursuers")
    positions = np.array([p.position for p in pursuers])
    dists, los, phi = _pair_geometry(evader.position, positions)
    best = None
    best_theta = math.inf
    n = len(pursuers)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            gap = (los[i] - los[j]) % TWO_PI
            theta = phi[i] + phi[j] - gap
            if theta < best_theta - 1e-12:
                best_theta = theta
                best = (i, j)
    return best[0], best[1], best_theta


def evader_weakest_link(evader, pursuers):
    """Escape heading through the weakest pursuer pair.

    Evaluates the closed-form heading terms of the one-vs-many evader law for
    the selected pair; the square roots are guarded with
    sqrt(max(d^2 - 2, 1e-6)).
    """
    i, j, _ = weakest_link_pair(evader, pursuers)
    positions = np.array([p.position for p in pursuers])
    dists, los, _ = _pair_geometry(evader.position, positions)
    d_i, d_j = dists[i], dists[j]
    l_i, l_j = los[i], los[j]
    g_i = math.sqrt(max(d_i ** 2 - 2.0, 1e-6))
    g_j = math.sqrt(max(d_j ** 2 - 2.0, 1e-6))
    psi_s = (1.0 / d_j) * (math.cos(l_j) - math.sin(l_j) / g_j) \
        - (1.0 / d_i) * (math.cos(l_i) + math.sin(l_i) / g_i)
    psi_c = (1.0 / d_i) * (math.sin(l_i) - math.cos(l_i) / g_i) \
        - (1.0 / d_j) * (math.sin(l_j) + math.cos(l_j) / g_j)
    return math.atan2(psi_s, psi_c)


def pursuer_intercept_heading(pursuer, evader, speed_ratio, capture_radius):
    """Heading toward the interception aim point.

    Aim offset per axis: (gamma * (evader - pursuer) + rho) / (1 - gamma^2).
    Singular at gamma = 1.
    """
    denom = 1.0 - speed_ratio ** 2
    if abs(denom) < 1e-12:
        raise ValueError("aim point undefined for speed ratio 1")
    off = (speed_ratio * (evader.position - pursuer.position)
           + capture_radius) / denom
    # +0.0 folds IEEE negative zeros so an axis-aligned aim gives heading +pi
    return math.atan2(off[1] + 0.0, off[0] + 0.0)


class WeakestLinkEvaderPolicy:
    """One-vs-many evader: always run for the weakest link."""

    def __call__(self, pursuers, evaders, scenario):
        return [(evader_weakest_link(evader, pursuers), scenario.evader_speed)
                for _, evader in sorted(evaders.items())]


class InterceptPursuerPolicy:
    """One-vs-many pursuers: chase the aim point; freeze after a capture.

    A pursuer that has come within the capture radius of an evader stays put
    for the rest of the episode.
    """

    def __init__(self):
        self.frozen = set()

    def reset(self):
        self.frozen.clear()

    def __call__(self, pursuers, evaders, scenario):
        live = [evaders[j] for j in sorted(evaders)]
        controls = []
        for i, pursuer in enumerate(pursuers):
            dists = [np.linalg.norm(e.position - pursuer.position) for e in live]
            nearest = int(np.argmin(dists))
            if i in self.frozen or dists[nearest] <= scenario.capture_radius:
                self.frozen.add(i)
                controls.append((0.0, 0.0))
                continue
            heading = pursuer_intercept_heading(
                pursuer, live[nearest], scenario.speed_ratio,
                scenario.capture_radius)
            controls.append((heading, scenario.pursuer_speed))
        return controls


# ---------------------------------------------------------------------------
# Value grid and HJI update
# ---------------------------------------------------------------------------

@dataclass
class ValueGrid:
    """Value function sampled on a uniform grid over the arena.

    ``values[i, j]`` is the value at (x_i, y_j) with x_i = -1 + i * spacing;
    spacing is 2 / (resolution - 1).
    """

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("values must be a square 2-D array")
        if self.resolution < 3:
            raise ValueError("grid resolution must be at least 3")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def resolution(self):
        return self.values.shape[0]

    @property
    def spacing(self):
        return (WORLD_MAX - WORLD_MIN) / (self.resolution - 1)

    def axis_coords(self):
        return np.linspace(WORLD_MIN, WORLD_MAX, self.resolution)

    @classmethod
    def distance_field(cls, evader_positions, capture_radius,
                       resolution=DEFAULT_GRID_RESOLUTION):
        """V(x) = min_j ||x - e_j|| - rho: negative inside capture range."""
        coords = np.linspace(WORLD_MIN, WORLD_MAX, resolution)
        xs, ys = np.meshgrid(coords, coords, indexing="ij")
        values = np.full((resolution, resolution), np.inf)
        for e in np.atleast_2d(np.asarray(evader_positions, dtype=float)):
            values = np.minimum(
                values, np.hypot(xs - e[0], ys - e[1]))
        return cls(values - capture_radius)

    def cell_of(self, position):
        """Nearest grid cell (i, j) for a world position."""
        idx = np.rint((np.asarray(position) - WORLD_MIN) / self.spacing)
        idx = np.clip(idx, 0, self.resolution - 1).astype(int)
        return int(idx[0]), int(idx[1])

    def interpolate(self, position):
        """Bilinear interpolation of the value at a world position."""
        pos = np.clip(np.asarray(position, dtype=float), WORLD_MIN, WORLD_MAX)
        u = (pos - WORLD_MIN) / self.spacing
        i0 = np.clip(np.floor(u).astype(int), 0, self.resolution - 2)
        fx, fy = u - i0
        i, j = i0
        v = self.values
        return float(
            v[i, j] * (1 - fx) * (1 - fy)
            + v[i + 1, j] * fx * (1 - fy)
            + v[i, j + 1] * (1 - fx) * fy
            + v[i + 1, j + 1] * fx * fy)

    def to_csv(self, path):
        """Row-major CSV dump (row index = x index) for debugging overlays."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.values:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        return cls(np.array(rows))


def _one_sided_differences(values, spacing):
    """Forward/backward differences along both axes.

    At the boundary the missing one-sided difference is substituted with the
    available one, so every cell carries a usable pair.
    """
    fwd_x = np.empty_like(values)
    back_x = np.empty_like(values)
    fwd_x[:-1, :] = (values[1:, :] - values[:-1, :]) / spacing
    back_x[1:, :] = fwd_x[:-1, :]
    fwd_x[-1, :] = back_x[-1, :]
    back_x[0, :] = fwd_x[0, :]

    fwd_y = np.empty_like(values)
    back_y = np.empty_like(values)
    fwd_y[:, :-1] = (values[:, 1:] - values[:, :-1]) / spacing
    back_y[:, 1:] = fwd_y[:, :-1]
    fwd_y[:, -1] = back_y[:, -1]
    back_y[:, 0] = fwd_y[:, 0]
    return fwd_x, back_x, fwd_y, back_y


def upwind_gradient(grid, cell, role):
    """Role-selected one-sided gradient at a cell.

    The minimising pursuer takes the backward difference where the forward
    difference is non-negative (and forward otherwise); the maximising evader
    mirrors the selection. Boundary cells fall back to the only available
    one-sided difference.
    """
    if role not in (PURSUER, EVADER):
        raise ValueError(f"role must be {PURSUER!r} or {EVADER!r}")
    i, j = cell
    fwd_x, back_x, fwd_y, back_y = _one_sided_differences(
        grid.values, grid.spacing)
    if role == PURSUER:
        gx = back_x[i, j] if fwd_x[i, j] >= 0 else fwd_x[i, j]
        gy = back_y[i, j] if fwd_y[i, j] >= 0 else fwd_y[i, j]
    else:
        gx = fwd_x[i, j] if fwd_x[i, j] >= 0 else back_x[i, j]
        gy = fwd_y[i, j] if fwd_y[i, j] >= 0 else back_y[i, j]
    return float(gx), float(gy)


def hji_update(grid, dt, pursuer_speed, evader_speed):
    """One explicit Euler step of the discrete HJI equation.

    V <- V - dt * H with H = v_P * |grad V|_P - v_E * |grad V|_E, where each
    player's gradient magnitude uses its own monotone (Godunov) one-sided
    selection. With the pursuer term alone the value field shrinks at speed
    v_P and stays bounded by its initial extremes; opposite-signed player
    terms cancel where the field is smooth and the speeds match.

    Rejects steps that violate the CFL bound dt * max(v) / spacing <= 1.
    """
    max_speed = max(pursuer_speed, evader_speed)
    if dt * max_speed / grid.spacing > 1.0 + 1e-12:
        raise ValueError(
            f"CFL violated: dt*v/dx = {dt * max_speed / grid.spacing:.3f} > 1")
    fwd_x, back_x, fwd_y, back_y = _one_sided_differences(
        grid.values, grid.spacing)
    pursuer_norm = np.sqrt(
        np.maximum(back_x, 0.0) ** 2 + np.minimum(fwd_x, 0.0) ** 2
        + np.maximum(back_y, 0.0) ** 2 + np.minimum(fwd_y, 0.0) ** 2)
    evader_norm = np.sqrt(
        np.maximum(fwd_x, 0.0) ** 2 + np.minimum(back_x, 0.0) ** 2
        + np.maximum(fwd_y, 0.0) ** 2 + np.minimum(back_y, 0.0) ** 2)
    hamiltonian = pursuer_speed * pursuer_norm - evader_speed * evader_norm
    return ValueGrid(grid.values - dt * hamiltonian)


# ---------------------------------------------------------------------------
# Assignment and hybrid control
# ---------------------------------------------------------------------------

@dataclass
class Assignment:
    """Pursuer-to-evader matching. ``targets[i]`` is the evader column chased
    by pursuer i; ``total_cost`` sums the cost-matrix entries at all assigned
    pairs (including surplus pursuers doubling up)."""

    targets: list
    total_cost: float


def hybrid_cost_matrix(pursuers, evaders, grid, alpha=DEFAULT_BLEND_WEIGHT):
    """Assignment cost: alpha * distance + (1 - alpha) * rescaled grid value.

    The grid value at each evader is min-max rescaled onto the observed
    distance range so both terms are commensurate before blending.
    """
    if len(evaders) == 0:
        raise ValueError("cost matrix needs at least one evader")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    p_pos = np.array([p.position for p in pursuers])
    e_pos = np.array([e.position for e in evaders])
    dists = np.linalg.norm(p_pos[:, None, :] - e_pos[None, :, :], axis=2)
    values = np.array([grid.interpolate(e) for e in e_pos])
    d_lo, d_hi = float(dists.min()), float(dists.max())
    v_lo, v_hi = float(values.min()), float(values.max())
    if v_hi - v_lo > 1e-12:
        scaled = d_lo + (values - v_lo) / (v_hi - v_lo) * (d_hi - d_lo)
    else:
        scaled = np.full_like(values, 0.5 * (d_lo + d_hi))
    return alpha * dists + (1.0 - alpha) * scaled[None, :]


def hungarian_assign(cost):
    """Minimum-cost matching; surplus pursuers chase their cheapest evader.

    With more pursuers than evaders, the optimal matching covers every evader
    once and each leftover pursuer is then assigned to the evader that is
    individually cheapest for it.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError("cost must be a non-empty 2-D matrix")
    if np.isnan(cost).any():
        raise ValueError("cost matrix contains NaN")
    rows, cols = linear_sum_assignment(cost)
    targets = [-1] * cost.shape[0]
    for r, c in zip(rows, cols):
        targets[r] = int(c)
    for i, t in enumerate(targets):
        if t < 0:
            targets[i] = int(np.argmin(cost[i]))
    total = float(sum(cost[i, t] for i, t in enumerate(targets)))
    return Assignment(targets=targets, total_cost=total)


def _unit(vector):
    norm = np.linalg.norm(vector)
    if norm < 1e-12:
        return np.zeros(2)
    return vector / norm


def pursuer_hybrid_control(pursuer, target, grid, alpha=DEFAULT_BLEND_WEIGHT):
    """Unit control blending direct pursuit with value-gradient descent.

    u = alpha * u_geometric + (1 - alpha) * u_gradient, renormalised. Returns
    the zero vector when the pursuer sits on the target or the blend cancels.
    """
    diff = target.position - pursuer.position
    if np.linalg.norm(diff) < 1e-12:
        return np.zeros(2)
    u_geometric = _unit(diff)
    gradient = np.array(upwind_gradient(grid, grid.cell_of(pursuer.position),
                                        PURSUER))
    u_gradient = _unit(-gradient)
    return _unit(alpha * u_geometric + (1.0 - alpha) * u_gradient)


def evader_escape_control(evader, pursuers, grid, avoid_radius):
    """Unit control: value-gradient ascent plus inverse-square avoidance.

    The avoidance vector sums (e - p) / ||e - p||^2 over pursuers strictly
    inside the avoidance radius, with the distance floored at 1e-6 for
    near-coincident pairs. Both terms are normalised before being added.
    """
    gradient = np.array(upwind_gradient(grid, grid.cell_of(evader.position),
                                        EVADER))
    avoid = np.zeros(2)
    for pursuer in pursuers:
        diff = evader.position - pursuer.position
        dist = np.linalg.norm(diff)
        if dist < avoid_radius:
            avoid = avoid + diff / max(dist, 1e-6) ** 2
    return _unit(_unit(gradient) + _unit(avoid))


def step_value_grid(evaders, scenario, resolution=DEFAULT_GRID_RESOLUTION):
    """Per-step grid: distance field to the live evaders advanced one HJI step.

    Re-seeding from the current evader positions keeps the gradient pointed
    at the actual targets as the game moves.
    """
    positions = [e.position for e in evaders]
    grid = ValueGrid.distance_field(positions, scenario.capture_radius,
                                    resolution)
    return hji_update(grid, scenario.dt, scenario.pursuer_speed,
                      scenario.evader_speed)


class HybridPursuerPolicy:
    """Many-vs-many pursuers: Hungarian assignment + blended control.

    Stateless: the value grid is recomputed from the current evader
    positions, so concurrent episodes never share anything.
    """

    def __init__(self, alpha=DEFAULT_BLEND_WEIGHT,
                 resolution=DEFAULT_GRID_RESOLUTION):
        self.alpha = alpha
        self.resolution = resolution

    def __call__(self, pursuers, evaders, scenario):
        live = [evaders[j] for j in sorted(evaders)]
        grid = step_value_grid(live, scenario, self.resolution)
        cost = hybrid_cost_matrix(pursuers, live, grid, self.alpha)
        assignment = hungarian_assign(cost)
        controls = []
        for pursuer, target_col in zip(pursuers, assignment.targets):
            u = pursuer_hybrid_control(pursuer, live[target_col], grid,
                                       self.alpha)
            speed = scenario.pursuer_speed * float(np.linalg.norm(u))
            controls.append((math.atan2(u[1], u[0]), speed))
        return controls


class EscapeEvaderPolicy:
    """Many-vs-many evaders: gradient ascent plus pursuer avoidance."""

    def __init__(self, avoid_radius=None,
                 resolution=DEFAULT_GRID_RESOLUTION):
        self.avoid_radius = avoid_radius
        self.resolution = resolution

    def __call__(self, pursuers, evaders, scenario):
        r_avoid = self.avoid_radius
        if r_avoid is None:
            r_avoid = 3.0 * scenario.capture_radius
        live = [evaders[j] for j in sorted(evaders)]
        grid = step_value_grid(live, scenario, self.resolution)
        controls = []
        for evader in live:
            u = evader_escape_control(evader, pursuers, grid, r_avoid)
            speed = scenario.evader_speed * float(np.linalg.norm(u))
            controls.append((math.atan2(u[1], u[0]), speed))
        return controls


def make_policies(scenario, alpha=DEFAULT_BLEND_WEIGHT,
                  resolution=DEFAULT_GRID_RESOLUTION):
    """The paper-faithful (pursuer_policy, evader_policy) pair for a scenario."""
    if scenario.game_kind == MANY_VS_MANY:
        return (HybridPursuerPolicy(alpha=alpha, resolution=resolution),
                EscapeEvaderPolicy(resolution=resolution))
    return InterceptPursuerPolicy(), WeakestLinkEvaderPolicy()
