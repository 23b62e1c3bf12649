"""Graphs over pursuer configurations for the network.

Nodes are pursuers. Two pursuers are connected when their distance is at most
the mean pairwise distance within the configuration; edge weight is the
inverse distance. Each node carries ten features: the three normalised
utilities, the capture radius, velocity, position, and two noise channels
that are only meaningful at generation time (training graphs fill them with
seeded noise so the network never learns to rely on them).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .features import per_pursuer_normalized

NODE_FEATURE_DIM = 10
MIN_PAIR_DISTANCE = 1e-6


@dataclass
class ConfigGraph:
    """Node-feature matrix plus weighted pursuer-pursuer adjacency."""

    node_features: np.ndarray
    edges: list  # (i, j, weight) with i < j; storage is undirected
    game_type: tuple
    source_index: int = field(default=-1)  # row in the originating front

    def __post_init__(self):
        self.node_features = np.asarray(self.node_features, dtype=float)
        self.game_type = tuple(self.game_type)
        if self.node_features.ndim != 2 \
                or self.node_features.shape[1] != NODE_FEATURE_DIM:
            raise ValueError(
                f"node features must be (n, {NODE_FEATURE_DIM})")
        n = self.node_features.shape[0]
        for i, j, w in self.edges:
            if not (0 <= i < n and 0 <= j < n and i != j):
                raise ValueError(f"bad edge ({i}, {j})")
            if w <= 0:
                raise ValueError("edge weights must be positive")

    @property
    def n_nodes(self):
        return self.node_features.shape[0]

    def adjacency(self):
        """Symmetric weighted adjacency without self-loops."""
        a = np.zeros((self.n_nodes, self.n_nodes))
        for i, j, w in self.edges:
            a[i, j] = a[j, i] = w
        return a

    def permuted(self, order):
        """Graph with nodes reindexed by ``order`` (order[k] = old index)."""
        order = list(order)
        inverse = {old: new for new, old in enumerate(order)}
        edges = [(min(inverse[i], inverse[j]), max(inverse[i], inverse[j]), w)
                 for i, j, w in self.edges]
        return ConfigGraph(self.node_features[order], edges, self.game_type,
                           self.source_index)

    def to_json_obj(self):
        return {
            "node_features": self.node_features.tolist(),
            "edges": [[int(i), int(j), float(w)] for i, j, w in self.edges],
            "game_type": list(self.game_type),
            "source_index": self.source_index,
        }

    @classmethod
    def from_json_obj(cls, obj):
        return cls(node_features=np.array(obj["node_features"]),
                   edges=[(int(i), int(j), float(w)) for i, j, w in obj["edges"]],
                   game_type=tuple(obj["game_type"]),
                   source_index=obj.get("source_index", -1))


def pairwise_edges(positions):
    """Edges by the mean-distance rule: keep (i, j) iff d_ij <= mean d."""
    positions = np.asarray(positions, dtype=float)
    n = len(positions)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    dists = [max(np.linalg.norm(positions[i] - positions[j]),
                 MIN_PAIR_DISTANCE) for i, j in pairs]
    mean_dist = float(np.mean(dists))
    return [(i, j, 1.0 / d)
            for (i, j), d in zip(pairs, dists) if d <= mean_dist + 1e-12]


def build_graph(config, per_pursuer_utils, noise=None, rng=None,
                source_index=-1):
    """Assemble the node features and pursuer-pursuer edges.

    ``per_pursuer_utils`` is the (n, 3) matrix of per-pursuer normalised
    utilities. Node rows are [capture, distance, heading, rho, vx, vy, x, y,
    noise1, noise2]; the noise channels come from ``noise`` (an (n, 2)
    array), else from ``rng`` as uniforms in [0, 1], else zeros.
    """
    if config.n_pursuers < 2:
        raise ValueError("a graph needs at least two pursuers")
    utils = np.asarray(per_pursuer_utils, dtype=float)
    if utils.shape != (config.n_pursuers, 3):
        raise ValueError("per-pursuer utilities must be (n_pursuers, 3)")
    if noise is None:
        if rng is not None:
            noise = rng.uniform(0.0, 1.0, size=(config.n_pursuers, 2))
        else:
            noise = np.zeros((config.n_pursuers, 2))
    noise = np.asarray(noise, dtype=float).reshape(config.n_pursuers, 2)
    rho = np.full((config.n_pursuers, 1), config.capture_radius)
    features = np.hstack([utils, rho, config.velocities(),
                          config.positions(), noise])
    return ConfigGraph(node_features=features,
                       edges=pairwise_edges(config.positions()),
                       game_type=config.game_type,
                       source_index=source_index)


def graphs_from_front(front, evader_samples, rng=None):
    """One training graph per front member."""
    graphs = []
    for idx, (config, _) in enumerate(front.members):
        utils = per_pursuer_normalized(config, evader_samples)
        graphs.append(build_graph(config, utils, rng=rng, source_index=idx))
    return graphs


def save_dataset(graphs, path):
    with open(path, "w") as fh:
        json.dump([g.to_json_obj() for g in graphs], fh, sort_keys=True)


def load_dataset(path):
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):  # annotated by the pipeline
        data = data["items"]
    return [ConfigGraph.from_json_obj(obj) for obj in data]
