"""Discrete-time, continuous-space 2-D pursuit-evasion arena.

Agents live on the square [-1, 1]^2. Each simulation step every agent picks a
heading and a speed, takes one forward-Euler step, and is clamped back into
the arena. An evader is captured as soon as some pursuer is within the
capture radius; captured evaders leave the game.

Two game kinds are supported:

* ``one_vs_many`` -- a single fast evader against 2-5 slower pursuers
  (speed ratio gamma = v_E / v_P > 1).
* ``many_vs_many`` -- 1-5 slow evaders against faster pursuers (gamma = 1/2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

WORLD_MIN = -1.0
WORLD_MAX = 1.0

ONE_VS_MANY = "one_vs_many"
MANY_VS_MANY = "many_vs_many"

# Supported team sizes. "4x2" means 4 pursuers vs 2 evaders.
GAME_TYPES = (
    "2x1", "3x1", "4x1", "5x1",
    "4x2", "4x3", "4x4", "4x5",
    "5x2", "5x3", "5x4", "5x5",
)


@dataclass
class AgentState:
    """Position and velocity of one agent, both 2-vectors in world units."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(2)

    @classmethod
    def at(cls, x, y, vx=0.0, vy=0.0):
        return cls(np.array([x, y], float), np.array([vx, vy], float))

    def copy(self):
        return AgentState(self.position.copy(), self.velocity.copy())

    def to_list(self):
        return [float(self.position[0]), float(self.position[1]),
                float(self.velocity[0]), float(self.velocity[1])]

    @classmethod
    def from_list(cls, values):
        x, y, vx, vy = values
        return cls.at(x, y, vx, vy)


def clamp_position(position):
    """Clamp a position into the arena bounds."""
    return np.clip(np.asarray(position, dtype=float), WORLD_MIN, WORLD_MAX)


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one game setup.

    Speeds are stored explicitly; the speed ratio gamma = evader_speed /
    pursuer_speed is derived. One-vs-many games require gamma > 1 (fast
    evader); many-vs-many games fix gamma = 1/2.
    """

    n_pursuers: int
    n_evaders: int
    game_kind: str
    pursuer_speed: float
    evader_speed: float
    capture_radius: float = 0.1
    dt: float = 0.05
    horizon: int = 40

    def __post_init__(self):
        if self.game_kind not in (ONE_VS_MANY, MANY_VS_MANY):
            raise ValueError(f"unknown game kind {self.game_kind!r}")
        if not 2 <= self.n_pursuers <= 5:
            raise ValueError("n_pursuers must be in 2..5")
        if not 1 <= self.n_evaders <= 5:
            raise ValueError("n_evaders must be in 1..5")
        if self.dt <= 0 or self.capture_radius <= 0 or self.horizon < 1:
            raise ValueError("dt, capture_radius and horizon must be positive")
        if self.pursuer_speed <= 0 or self.evader_speed <= 0:
            raise ValueError("speeds must be positive")
        if self.game_kind == ONE_VS_MANY:
            if self.n_evaders != 1:
                raise ValueError("one_vs_many requires exactly one evader")
            if self.speed_ratio <= 1:
                raise ValueError("one_vs_many requires speed ratio > 1")
        else:
            if abs(self.speed_ratio - 0.5) > 1e-12:
                raise ValueError("many_vs_many requires speed ratio 1/2")

    @property
    def speed_ratio(self):
        """gamma = v_E / v_P."""
        return self.evader_speed / self.pursuer_speed

    @property
    def game_type(self):
        return f"{self.n_pursuers}x{self.n_evaders}"

    @classmethod
    def one_vs_many(cls, n_pursuers, **kwargs):
        """Fast evader vs slow pursuers (gamma = 2 by default)."""
        kwargs.setdefault("pursuer_speed", 0.5)
        kwargs.setdefault("evader_speed", 1.0)
        return cls(n_pursuers=n_pursuers, n_evaders=1, game_kind=ONE_VS_MANY,
                   **kwargs)

    @classmethod
    def many_vs_many(cls, n_pursuers, n_evaders, **kwargs):
        """Fast pursuers vs slow evaders (gamma = 1/2)."""
        kwargs.setdefault("pursuer_speed", 1.0)
        kwargs.setdefault("evader_speed", 0.5)
        return cls(n_pursuers=n_pursuers, n_evaders=n_evaders,
                   game_kind=MANY_VS_MANY, **kwargs)

    @classmethod
    def for_game_type(cls, game_type, **kwargs):
        """Build the canonical scenario for a "PxE" game-type string."""
        n_p, n_e = parse_game_type(game_type)
        if n_e == 1:
            return cls.one_vs_many(n_p, **kwargs)
        return cls.many_vs_many(n_p, n_e, **kwargs)

    def to_dict(self):
        return {
            "n_pursuers": self.n_pursuers,
            "n_evaders": self.n_evaders,
            "game_kind": self.game_kind,
            "pursuer_speed": self.pursuer_speed,
            "evader_speed": self.evader_speed,
            "capture_radius": self.capture_radius,
            "dt": self.dt,
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        """Load a scenario from a TOML or JSON config file."""
        path = Path(path)
        if path.suffix.lower() == ".toml":
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        else:
            with open(path) as fh:
                data = json.load(fh)
        return cls.from_dict(data.get("scenario", data))


def parse_game_type(game_type):
    """'4x2' -> (4, 2), validated against the supported game types."""
    if game_type not in GAME_TYPES:
        raise ValueError(
            f"unsupported game type {game_type!r}; expected one of {GAME_TYPES}")
    n_p, n_e = game_type.split("x")
    return int(n_p), int(n_e)


def integrate_step(state, heading, speed, dt):
    """One forward-Euler step along ``heading`` at ``speed``.

    The new position is clamped to the arena; the stored velocity is the
    commanded one (speed * unit heading vector), not the clamped realisation.
    """
    if speed < 0:
        raise ValueError("speed must be non-negative")
    if dt <= 0:
        raise ValueError("dt must be positive")
    direction = np.array([np.cos(heading), np.sin(heading)])
    velocity = speed * direction
    position = clamp_position(state.position + velocity * dt)
    return AgentState(position, velocity)


def detect_captures(pursuers, evaders, capture_radius):
    """Indices of evaders within ``capture_radius`` of any pursuer.

    The boundary counts: distance exactly equal to the radius is a capture.
    Output is ordered by evader index.
    """
    if capture_radius <= 0:
        raise ValueError("capture_radius must be positive")
    captured = []
    for j, evader in enumerate(evaders):
        for pursuer in pursuers:
            if np.linalg.norm(evader.position - pursuer.position) <= capture_radius:
                captured.append(j)
                break
    return captured


@dataclass
class StepRecord:
    """State snapshot after one step. ``evaders`` holds only live-or-just-
    captured evaders keyed by their original index; ``events`` lists evaders
    captured at this step."""

    step: int
    pursuers: list
    evaders: dict
    events: list = field(default_factory=list)

    def to_json_obj(self):
        return {
            "step": self.step,
            "pursuers": [p.to_list() for p in self.pursuers],
            "evaders": {str(j): e.to_list() for j, e in self.evaders.items()},
            "events": list(self.events),
        }

    @classmethod
    def from_json_obj(cls, obj):
        return cls(
            step=obj["step"],
            pursuers=[AgentState.from_list(v) for v in obj["pursuers"]],
            evaders={int(j): AgentState.from_list(v)
                     for j, v in obj["evaders"].items()},
            events=[int(j) for j in obj["events"]],
        )


@dataclass
class EpisodeLog:
    """Full trajectory of one episode plus its capture events."""

    scenario: Scenario
    seed: int
    steps: list = field(default_factory=list)

    @property
    def terminal_step(self):
        return self.steps[-1].step if self.steps else 0

    @property
    def capture_events(self):
        """(evader index, step) pairs in chronological order."""
        events = []
        for record in self.steps:
            events.extend((j, record.step) for j in record.events)
        return events

    def capture_times(self):
        """Per-evader (time, captured) pairs for survival analysis.

        Evaders alive at the end of the episode are right-censored at the
        horizon.
        """
        captured_at = dict(self.capture_events)
        out = []
        for j in range(self.scenario.n_evaders):
            if j in captured_at:
                out.append((captured_at[j], True))
            else:
                out.append((self.scenario.horizon, False))
        return out

    def pursuer_positions(self):
        """All logged pursuer positions as an (n_records * n_pursuers, 2) array."""
        rows = [p.position for record in self.steps for p in record.pursuers]
        return np.array(rows).reshape(-1, 2)

    def to_jsonl(self, path):
        """Line-oriented JSON: a header line then one line per step."""
        with open(path, "w") as fh:
            header = {"scenario": self.scenario.to_dict(), "seed": self.seed}
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for record in self.steps:
                fh.write(json.dumps(record.to_json_obj(), sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path):
        with open(path) as fh:
            header = json.loads(fh.readline())
            log = cls(scenario=Scenario.from_dict(header["scenario"]),
                      seed=header["seed"])
            for line in fh:
                if line.strip():
                    log.steps.append(StepRecord.from_json_obj(json.loads(line)))
        return log


def run_episode(scenario, pursuer_policy, evader_policy, initial_config,
                evader_init, rng_seed=0):
    """Play one episode to capture-of-all-evaders or the horizon.

    ``initial_config`` provides the pursuer states (anything exposing
    ``.states``, e.g. a Configuration, or a plain list of AgentState);
    ``evader_init`` is a list of AgentState. Policies are callables
    ``policy(pursuers, evaders, scenario) -> [(heading, speed), ...]``;
    stateful policies may also expose ``reset()``.

    The run is deterministic given its inputs: the seed is recorded in the
    log and forwarded to policies that want randomness, but the bundled
    controllers are pure functions of the state.
    """
    pursuer_states = getattr(initial_config, "states", initial_config)
    if len(pursuer_states) != scenario.n_pursuers:
        raise ValueError(
            f"configuration has {len(pursuer_states)} pursuers, "
            f"scenario wants {scenario.n_pursuers}")
    if len(evader_init) != scenario.n_evaders:
        raise ValueError(
            f"got {len(evader_init)} evader states, "
            f"scenario wants {scenario.n_evaders}")

    for policy in (pursuer_policy, evader_policy):
        reset = getattr(policy, "reset", None)
        if reset is not None:
            reset()

    pursuers = [s.copy() for s in pursuer_states]
    evaders = {j: s.copy() for j, s in enumerate(evader_init)}
    log = EpisodeLog(scenario=scenario, seed=rng_seed)

    def snapshot(step):
        return StepRecord(
            step=step,
            pursuers=[p.copy() for p in pursuers],
            evaders={j: e.copy() for j, e in evaders.items()},
        )

    # Step 0: initial state, with captures possible immediately.
    record = snapshot(0)
    indices = sorted(evaders)
    hits = detect_captures(pursuers, [evaders[j] for j in indices],
                           scenario.capture_radius)
    record.events = [indices[h] for h in hits]
    log.steps.append(record)
    for j in record.events:
        del evaders[j]

    for step in range(1, scenario.horizon + 1):
        if not evaders:
            break
        pursuer_controls = pursuer_policy(pursuers, evaders, scenario)
        evader_controls = evader_policy(pursuers, evaders, scenario)
        pursuers = [
            integrate_step(p, heading, speed, scenario.dt)
            for p, (heading, speed) in zip(pursuers, pursuer_controls)
        ]
        evaders = {
            j: integrate_step(evaders[j], heading, speed, scenario.dt)
            for j, (heading, speed) in zip(sorted(evaders), evader_controls)
        }
        record = snapshot(step)
        indices = sorted(evaders)
        hits = detect_captures(pursuers, [evaders[j] for j in indices],
                               scenario.capture_radius)
        record.events = [indices[h] for h in hits]
        log.steps.append(record)
        for j in record.events:
            del evaders[j]

    return log
