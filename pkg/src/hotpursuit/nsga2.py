"""NSGA-II search for Pareto-optimal pursuer configurations.

Genomes are flat vectors of per-pursuer (x, y, vx, vy). Positions are bounded
by the arena and velocity components by the pursuer speed cap of the game
kind; decoded velocities are additionally rescaled onto the cap when their
magnitude exceeds it. Fitness is the minimisation-sense objective vector of
the configuration's aggregated features against the fixed evader samples.

The operators are the standard set: fast non-dominated sorting, crowding
distance, binary crowded tournament, simulated binary crossover and
polynomial mutation.
"""

from __future__ import annotations

import numpy as np

from .features import (Configuration, FeatureVector, aggregate_features,
                       pareto_front)
from .world import WORLD_MAX, WORLD_MIN, parse_game_type

SBX_ETA = 15.0
MUTATION_ETA = 20.0
CROSSOVER_PROB = 0.9


def pursuer_speed_cap(game_type):
    """Speed cap used for genome velocity bounds: 0.5 in one-vs-many games
    (the evader is the fast side), 1.0 in many-vs-many games."""
    n_p, n_e = game_type
    return 0.5 if n_e == 1 else 1.0


def decode_genome(genome, game_type, capture_radius):
    """Genome -> Configuration, rescaling velocities onto the speed cap."""
    n_p = game_type[0]
    values = np.asarray(genome, dtype=float).reshape(n_p, 4)
    positions = values[:, :2]
    velocities = values[:, 2:].copy()
    cap = pursuer_speed_cap(game_type)
    norms = np.linalg.norm(velocities, axis=1)
    over = norms > cap
    velocities[over] *= (cap / norms[over])[:, None]
    return Configuration.from_arrays(positions, velocities, capture_radius,
                                     game_type)


def fast_nondominated_sort(objectives):
    """Indices grouped into fronts; front 0 is the non-dominated set."""
    n = len(objectives)
    dominated_by = [[] for _ in range(n)]
    domination_count = np.zeros(n, dtype=int)
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if np.all(objectives[p] <= objectives[q]) \
                    and np.any(objectives[p] < objectives[q]):
                dominated_by[p].append(q)
            elif np.all(objectives[q] <= objectives[p]) \
                    and np.any(objectives[q] < objectives[p]):
                domination_count[p] += 1
    fronts = [[p for p in range(n) if domination_count[p] == 0]]
    while fronts[-1]:
        nxt = []
        for p in fronts[-1]:
            for q in dominated_by[p]:
                domination_count[q] -= 1
                if domination_count[q] == 0:
                    nxt.append(q)
        fronts.append(nxt)
    fronts.pop()
    return fronts


def crowding_distance(objectives):
    """Crowding distances for one front's objective rows."""
    objectives = np.asarray(objectives, dtype=float)
    n, m = objectives.shape
    distance = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(m):
        order = np.argsort(objectives[:, k], kind="stable")
        lo, hi = objectives[order[0], k], objectives[order[-1], k]
        distance[order[0]] = distance[order[-1]] = np.inf
        if hi - lo <= 0:
            continue
        gaps = (objectives[order[2:], k] - objectives[order[:-2], k]) / (hi - lo)
        distance[order[1:-1]] += gaps
    return distance


def _rank_and_crowding(objectives):
    ranks = np.empty(len(objectives), dtype=int)
    crowding = np.empty(len(objectives))
    for rank, front in enumerate(fast_nondominated_sort(objectives)):
        ranks[front] = rank
        crowding[front] = crowding_distance(objectives[front])
    return ranks, crowding


def _tournament(rng, ranks, crowding):
    a, b = rng.integers(0, len(ranks), size=2)
    if ranks[a] < ranks[b]:
        return a
    if ranks[b] < ranks[a]:
        return b
    if crowding[a] > crowding[b]:
        return a
    if crowding[b] > crowding[a]:
        return b
    return min(a, b)


def sbx_crossover(rng, parent_a, parent_b, lower, upper, eta=SBX_ETA,
                  prob=CROSSOVER_PROB):
    """Simulated binary crossover with per-variable exchange."""
    child_a, child_b = parent_a.copy(), parent_b.copy()
    if rng.random() > prob:
        return child_a, child_b
    for k in range(len(parent_a)):
        if rng.random() > 0.5:
            continue
        x1, x2 = parent_a[k], parent_b[k]
        if abs(x1 - x2) < 1e-14:
            continue
        lo, hi = (x1, x2) if x1 < x2 else (x2, x1)
        u = rng.random()
        beta = 1.0 + 2.0 * (lo - lower[k]) / (hi - lo)
        alpha = 2.0 - beta ** -(eta + 1.0)
        if u <= 1.0 / alpha:
            beta_q = (u * alpha) ** (1.0 / (eta + 1.0))
        else:
            beta_q = (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
        c1 = 0.5 * ((lo + hi) - beta_q * (hi - lo))
        beta = 1.0 + 2.0 * (upper[k] - hi) / (hi - lo)
        alpha = 2.0 - beta ** -(eta + 1.0)
        if u <= 1.0 / alpha:
            beta_q = (u * alpha) ** (1.0 / (eta + 1.0))
        else:
            beta_q = (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))
        c2 = 0.5 * ((lo + hi) + beta_q * (hi - lo))
        c1 = min(max(c1, lower[k]), upper[k])
        c2 = min(max(c2, lower[k]), upper[k])
        if rng.random() < 0.5:
            c1, c2 = c2, c1
        child_a[k], child_b[k] = c1, c2
    return child_a, child_b


def polynomial_mutation(rng, genome, lower, upper, eta=MUTATION_ETA,
                        prob=None):
    """Deb's polynomial mutation; default rate 1 / genome length."""
    if prob is None:
        prob = 1.0 / len(genome)
    out = genome.copy()
    for k in range(len(genome)):
        if rng.random() > prob:
            continue
        span = upper[k] - lower[k]
        if span <= 0:
            continue
        x = out[k]
        d1 = (x - lower[k]) / span
        d2 = (upper[k] - x) / span
        u = rng.random()
        power = 1.0 / (eta + 1.0)
        if u < 0.5:
            delta = (2.0 * u + (1.0 - 2.0 * u)
                     * (1.0 - d1) ** (eta + 1.0)) ** power - 1.0
        else:
            delta = 1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5)
                           * (1.0 - d2) ** (eta + 1.0)) ** power
        out[k] = min(max(x + delta * span, lower[k]), upper[k])
    return out


def nsga2_optimize(game_type, evader_samples, population_size=500,
                   generations=200, rng_seed=0, capture_radius=0.1,
                   trace=None):
    """Run NSGA-II and return the rank-0 front of the final population.

    ``game_type`` is either a "PxE" string or an (n_pursuers, n_evaders)
    pair. When ``trace`` is a dict, per-run diagnostics are stored in it:
    the initial front's objective rows, every evaluated objective row of the
    first generation, and the final front's objective rows.
    """
    if isinstance(game_type, str):
        game_type = parse_game_type(game_type)
    if population_size < 4 or population_size % 2:
        raise ValueError("population_size must be even and at least 4")
    if generations < 1:
        raise ValueError("generations must be at least 1")

    n_vars = game_type[0] * 4
    cap = pursuer_speed_cap(game_type)
    lower = np.array(([WORLD_MIN, WORLD_MIN, -cap, -cap]) * game_type[0])
    upper = np.array(([WORLD_MAX, WORLD_MAX, cap, cap]) * game_type[0])

    rng = np.random.default_rng(rng_seed)
    samples = np.asarray(evader_samples, dtype=float)

    def evaluate(genomes):
        objs = np.empty((len(genomes), 3))
        for i, genome in enumerate(genomes):
            cfg = decode_genome(genome, game_type, capture_radius)
            objs[i] = aggregate_features(cfg, samples).objectives()
        return objs

    population = rng.uniform(lower, upper, size=(population_size, n_vars))
    objectives = evaluate(population)
    if trace is not None:
        front0 = fast_nondominated_sort(objectives)[0]
        trace["initial_front_objectives"] = objectives[front0].copy()
        trace["evaluated_objectives"] = [objectives.copy()]

    for generation in range(generations):
        ranks, crowding = _rank_and_crowding(objectives)
        children = np.empty_like(population)
        for pair in range(population_size // 2):
            pa = population[_tournament(rng, ranks, crowding)]
            pb = population[_tournament(rng, ranks, crowding)]
            ca, cb = sbx_crossover(rng, pa, pb, lower, upper)
            children[2 * pair] = polynomial_mutation(rng, ca, lower, upper)
            children[2 * pair + 1] = polynomial_mutation(rng, cb, lower, upper)
        child_objectives = evaluate(children)
        if trace is not None and generation == 0:
            trace["evaluated_objectives"].append(child_objectives.copy())

        pool = np.vstack([population, children])
        pool_objectives = np.vstack([objectives, child_objectives])
        selected = []
        for front in fast_nondominated_sort(pool_objectives):
            if len(selected) + len(front) <= population_size:
                selected.extend(front)
            else:
                crowd = crowding_distance(pool_objectives[front])
                order = sorted(range(len(front)),
                               key=lambda k: (-crowd[k], front[k]))
                selected.extend(front[k] for k in
                                order[:population_size - len(selected)])
                break
        population = pool[selected]
        objectives = pool_objectives[selected]

    final_front = fast_nondominated_sort(objectives)[0]
    if trace is not None:
        trace["final_front_objectives"] = objectives[final_front].copy()
    members = [
        (decode_genome(population[i], game_type, capture_radius),
         FeatureVector.from_objectives(objectives[i]))
        for i in final_front
    ]
    return pareto_front(members, game_type=game_type)
