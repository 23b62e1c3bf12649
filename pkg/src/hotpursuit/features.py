"""Objective-space features for pursuer configurations.

A configuration is scored by three utilities: a sigmoid capture potential, a
nearest-evader distance, and a heading-alignment angle. Since evaders are
unknown when a configuration is laid out, utilities are averaged over a fixed
set of uniformly sampled evader placements. After averaging over pursuers and
samples, the three utilities are proportionally normalised so they sum to
one; the resulting 3-vector is the point a configuration occupies in the
objective space.

The optimisation sense is: maximise capture, minimise distance, maximise
heading diversity, expressed as the minimisation vector
[-capture, distance, -heading].
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .world import WORLD_MAX, WORLD_MIN, AgentState, parse_game_type

ANGLE_EPS = 1e-9
DEFAULT_EVADER_SAMPLES = 32
EVADER_SAMPLE_SEED = 10120  # stable base for per-game-type sample draws


@dataclass
class Configuration:
    """The pursuer team's initial states for one game type."""

    states: list
    capture_radius: float
    game_type: tuple

    def __post_init__(self):
        self.game_type = tuple(self.game_type)
        if not 2 <= len(self.states) <= 5:
            raise ValueError("a configuration holds 2..5 pursuers")
        if len(self.states) != self.game_type[0]:
            raise ValueError("state count disagrees with game type")
        if self.capture_radius <= 0:
            raise ValueError("capture_radius must be positive")
        for s in self.states:
            if np.any(s.position < WORLD_MIN) or np.any(s.position > WORLD_MAX):
                raise ValueError("pursuer positions must lie inside the arena")

    @property
    def n_pursuers(self):
        return len(self.states)

    def positions(self):
        return np.array([s.position for s in self.states])

    def velocities(self):
        return np.array([s.velocity for s in self.states])

    @classmethod
    def from_arrays(cls, positions, velocities, capture_radius, game_type):
        states = [AgentState(p, v) for p, v in zip(positions, velocities)]
        return cls(states=states, capture_radius=capture_radius,
                   game_type=game_type)

    def to_dict(self):
        return {
            "states": [s.to_list() for s in self.states],
            "capture_radius": self.capture_radius,
            "game_type": list(self.game_type),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(states=[AgentState.from_list(v) for v in data["states"]],
                   capture_radius=data["capture_radius"],
                   game_type=tuple(data["game_type"]))


@dataclass(frozen=True)
class FeatureVector:
    """Normalised (capture, distance, heading) utilities; sums to one."""

    capture: float
    distance: float
    heading: float

    def __post_init__(self):
        total = self.capture + self.distance + self.heading
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"feature components must sum to 1, got {total}")
        if min(self.capture, self.distance, self.heading) < -1e-12:
            raise ValueError("feature components must be non-negative")

    def as_array(self):
        return np.array([self.capture, self.distance, self.heading])

    def objectives(self):
        """Minimisation-sense objective vector [-capture, distance, -heading]."""
        return np.array([-self.capture, self.distance, -self.heading])

    @classmethod
    def from_array(cls, values):
        return cls(float(values[0]), float(values[1]), float(values[2]))

    @classmethod
    def from_objectives(cls, objectives):
        return cls(float(-objectives[0]), float(objectives[1]),
                   float(-objectives[2]))


def u_capture(distance, capture_radius):
    """Sigmoid capture potential: 2 * (1 - 1 / (1 + exp((-d + r) / r))).

    Equals 1 exactly at d = r, exceeds 1 inside the radius, and decays
    smoothly to 0 with distance. Accepts scalars or arrays.
    """
    if capture_radius <= 0:
        raise ValueError("capture_radius must be positive")
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    out = 2.0 * (1.0 - 1.0 / (1.0 + np.exp((-d + capture_radius)
                                           / capture_radius)))
    return out if out.ndim else float(out)


def u_distance(position, evader_positions):
    """Distance to the nearest evader."""
    e = np.atleast_2d(np.asarray(evader_positions, dtype=float))
    if e.size == 0:
        raise ValueError("at least one evader required")
    return float(np.min(np.linalg.norm(e - np.asarray(position), axis=1)))


def u_heading(velocity, position, evader_positions):
    """Mean angle (radians) between the heading and the evader directions.

    angle_i = arccos(v . (e_i - p) / (|v| |e_i - p| + eps)), eps = 1e-9; the
    cosine is clamped into [-1, 1] before the arccos.
    """
    e = np.atleast_2d(np.asarray(evader_positions, dtype=float))
    if e.size == 0:
        raise ValueError("at least one evader required")
    v = np.asarray(velocity, dtype=float)
    offsets = e - np.asarray(position, dtype=float)
    denom = np.linalg.norm(v) * np.linalg.norm(offsets, axis=1) + ANGLE_EPS
    cosines = np.clip(offsets @ v / denom, -1.0, 1.0)
    return float(np.mean(np.arccos(cosines)))


def pursuer_utilities(config, evader_samples):
    """Raw per-pursuer utilities averaged over the evader samples.

    Returns an (n_pursuers, 3) array of (capture, distance, heading) with the
    heading already rescaled from radians into [0, 1] by dividing by pi. The
    capture potential is evaluated at the nearest-evader distance.
    """
    samples = np.asarray(evader_samples, dtype=float)
    if samples.ndim == 2:
        samples = samples[None, :, :]
    if samples.ndim != 3 or samples.shape[0] == 0 or samples.shape[1] == 0:
        raise ValueError("evader samples must be a non-empty (S, n_e, 2) array")
    positions = config.positions()
    velocities = config.velocities()
    # offsets: (S, n_p, n_e, 2); dist: (S, n_p, n_e)
    offsets = samples[:, None, :, :] - positions[None, :, None, :]
    dist = np.linalg.norm(offsets, axis=3)
    d_min = dist.min(axis=2)
    capture = u_capture(d_min, config.capture_radius).mean(axis=0)
    distance = d_min.mean(axis=0)
    v_norm = np.linalg.norm(velocities, axis=1)
    dots = np.einsum("snek,nk->sne", offsets, velocities)
    cosines = np.clip(dots / (v_norm[None, :, None] * dist + ANGLE_EPS),
                      -1.0, 1.0)
    heading = np.arccos(cosines).mean(axis=(0, 2)) / np.pi
    return np.stack([capture, distance, heading], axis=1)


def aggregate_features(config, evader_samples):
    """Configuration-level feature vector: average over pursuers and samples,
    then divide by the component sum so the three features total one."""
    utilities = pursuer_utilities(config, evader_samples).mean(axis=0)
    total = utilities.sum()
    if total <= 0:
        raise ValueError("all utilities vanished; normalisation undefined")
    return FeatureVector.from_array(utilities / total)


def per_pursuer_normalized(config, evader_samples):
    """Per-pursuer sum-to-one utility rows, (n_pursuers, 3).

    These rows feed the graph nodes; their mean is the aggregated vector the
    training loss compares against the front.
    """
    utilities = pursuer_utilities(config, evader_samples)
    totals = utilities.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ValueError("all utilities vanished; normalisation undefined")
    return utilities / totals


def evader_position_samples(game_type, n_samples=DEFAULT_EVADER_SAMPLES,
                            seed=None):
    """Fixed evader placements used to score configurations per game type.

    Deterministic for a given game type so every stage of the pipeline
    (search, training, comparison) scores against the same scenarios.
    """
    n_pursuers, n_evaders = parse_game_type(game_type) \
        if isinstance(game_type, str) else game_type
    base = EVADER_SAMPLE_SEED if seed is None else seed
    rng = np.random.default_rng([base, n_pursuers, n_evaders])
    return rng.uniform(WORLD_MIN, WORLD_MAX, size=(n_samples, n_evaders, 2))


def dominates(a, b):
    """True when ``a`` strictly dominates ``b``.

    Dominance is taken in the minimisation sense of the objective vector: no
    coordinate worse, at least one strictly better.
    """
    fa = a.objectives() if isinstance(a, FeatureVector) else np.asarray(a)
    fb = b.objectives() if isinstance(b, FeatureVector) else np.asarray(b)
    return bool(np.all(fa <= fb) and np.any(fa < fb))


@dataclass
class ParetoFront:
    """Non-dominated (Configuration, FeatureVector) pairs for one game type."""

    members: list
    game_type: tuple

    def __post_init__(self):
        self.game_type = tuple(self.game_type)

    def __len__(self):
        return len(self.members)

    def feature_matrix(self):
        return np.array([fv.as_array() for _, fv in self.members])

    def objective_matrix(self):
        return np.array([fv.objectives() for _, fv in self.members])

    def check_non_domination(self):
        """Verify no member strictly dominates another (reload guard)."""
        for i, (_, a) in enumerate(self.members):
            for j, (_, b) in enumerate(self.members):
                if i != j and dominates(a, b):
                    return False
        return True

    def to_json(self, path):
        data = {
            "game_type": list(self.game_type),
            "members": [
                {"configuration": cfg.to_dict(),
                 "features": list(fv.as_array())}
                for cfg, fv in self.members
            ],
        }
        with open(path, "w") as fh:
            json.dump(data, fh, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        members = [
            (Configuration.from_dict(m["configuration"]),
             FeatureVector.from_array(m["features"]))
            for m in data["members"]
        ]
        return cls(members=members, game_type=tuple(data["game_type"]))

    def to_csv(self, path):
        """One row per member: game type, features, flattened pursuer states."""
        n_p = self.game_type[0]
        header = ["game_type", "u_capture", "u_distance", "u_heading"]
        for i in range(n_p):
            header += [f"x{i}", f"y{i}", f"vx{i}", f"vy{i}"]
        lines = [",".join(header)]
        label = f"{self.game_type[0]}x{self.game_type[1]}"
        for cfg, fv in self.members:
            row = [label] + [repr(float(v)) for v in fv.as_array()]
            for s in cfg.states:
                row += [repr(v) for v in s.to_list()]
            lines.append(",".join(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def pareto_front(population, game_type=None):
    """Extract the non-dominated members, preserving input order.

    ``population`` is a list of (Configuration, FeatureVector) pairs.
    """
    if not population:
        raise ValueError("population must be non-empty")
    objectives = np.array([fv.objectives() for _, fv in population])
    keep = []
    for i in range(len(population)):
        dominated = False
        for j in range(len(population)):
            if i != j and dominates(objectives[j], objectives[i]):
                dominated = True
                break
        if not dominated:
            keep.append(population[i])
    gt = game_type if game_type is not None else keep[0][0].game_type
    return ParetoFront(members=keep, game_type=gt)
