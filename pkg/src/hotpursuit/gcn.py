"""Graph convolutional network that proposes pursuer placements.

Layer stack 10 -> 64 -> 32 -> 64 -> 2 with ReLU hidden activations: each
layer aggregates neighbours through the symmetric-normalised weighted
adjacency with self-loops, then applies an affine map. The linear 2-wide
output is squashed by tanh into arena coordinates.

Training minimises the Pareto loss: the Euclidean distance between the
generated configuration's aggregated utility vector and the nearest member
of the game type's Pareto front. The utilities of the generated positions
are differentiable (the generated heading is taken toward the arena origin),
so gradients flow from the loss through the utility definitions and the
network. All gradients are computed by hand in reverse mode; the optimiser
is Adam with decoupled weight decay.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .features import ANGLE_EPS, evader_position_samples, per_pursuer_normalized
from .features import Configuration
from .graphs import NODE_FEATURE_DIM, ConfigGraph
from .indicators import hypervolume
from .world import parse_game_type

LAYER_DIMS = (10, 64, 32, 64, 2)

# Per-channel sampling ranges for query-time noise inputs, used until a
# trained model records the ranges actually seen in its dataset.
DEFAULT_FEATURE_RANGES = np.array(
    [[0.0, 1.0]] * 3 + [[0.1, 0.1]] + [[-1.0, 1.0]] * 4 + [[0.0, 1.0]] * 2)


@dataclass
class TrainConfig:
    batch_size: int = 1024
    learning_rate: float = 1e-4
    weight_decay: float = 1e-2
    epochs: int = 150
    seed: int = 0

    def __post_init__(self):
        if min(self.batch_size, self.epochs) < 1:
            raise ValueError("batch_size and epochs must be at least 1")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be >= 0")


def normalized_adjacency(graph):
    """D^-1/2 (A + I) D^-1/2 over the weighted adjacency."""
    a = graph.adjacency() + np.eye(graph.n_nodes)
    d = np.sqrt(a.sum(axis=1))
    return a / np.outer(d, d)


class GcnModel:
    """Weights and biases of the four graph-convolution layers."""

    def __init__(self, weights, biases, seed=0,
                 feature_ranges=None):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.seed = seed
        if feature_ranges is None:
            feature_ranges = DEFAULT_FEATURE_RANGES.copy()
        self.feature_ranges = np.asarray(feature_ranges, dtype=float)
        expected = list(zip(LAYER_DIMS[:-1], LAYER_DIMS[1:]))
        got = [w.shape for w in self.weights]
        if got != expected:
            raise ValueError(f"layer shapes {got} do not match {expected}")
        for b, (_, out) in zip(self.biases, expected):
            if b.shape != (out,):
                raise ValueError("bias shapes do not match layer dims")
        for arr in self.weights + self.biases:
            if not np.all(np.isfinite(arr)):
                raise ValueError("model parameters must be finite")

    @classmethod
    def initialize(cls, seed=0):
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(LAYER_DIMS[:-1], LAYER_DIMS[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, seed=seed)

    def parameters(self):
        return self.weights + self.biases

    def copy(self):
        return GcnModel([w.copy() for w in self.weights],
                        [b.copy() for b in self.biases],
                        seed=self.seed,
                        feature_ranges=self.feature_ranges.copy())

    def to_dict(self):
        return {
            "format_version": 1,
            "layer_dims": list(LAYER_DIMS),
            "seed": self.seed,
            "feature_ranges": self.feature_ranges.tolist(),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        if data.get("format_version") != 1:
            raise ValueError("unsupported model file version")
        if data["layer_dims"] != list(LAYER_DIMS):
            raise ValueError("model layer dims do not match this build")
        return cls(data["weights"], data["biases"], seed=data["seed"],
                   feature_ranges=np.array(data["feature_ranges"]))

    def hash(self):
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _forward_cached(model, graph):
    """Forward pass keeping every intermediate needed for backprop."""
    x = np.asarray(graph.node_features, dtype=float)
    if x.ndim != 2 or x.shape[1] != NODE_FEATURE_DIM:
        raise ValueError(f"node features must be (n, {NODE_FEATURE_DIM})")
    a_hat = normalized_adjacency(graph)
    h = x
    cache = {"a_hat": a_hat, "aggregated": [], "pre_activations": []}
    last = len(model.weights) - 1
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        m = a_hat @ h
        z = m @ w + b
        cache["aggregated"].append(m)
        cache["pre_activations"].append(z)
        h = z if layer == last else np.maximum(z, 0.0)
    positions = np.tanh(h)
    cache["positions"] = positions
    return positions, cache


def gcn_forward(model, graph):
    """Node-wise (x, y) positions inside the arena, one row per pursuer."""
    positions, _ = _forward_cached(model, graph)
    return positions


def _backward(model, cache, d_positions):
    """Gradients of all parameters given dLoss/dPositions."""
    a_hat = cache["a_hat"]
    positions = cache["positions"]
    dz = d_positions * (1.0 - positions ** 2)
    d_weights = [None] * len(model.weights)
    d_biases = [None] * len(model.biases)
    for layer in range(len(model.weights) - 1, -1, -1):
        m = cache["aggregated"][layer]
        d_weights[layer] = m.T @ dz
        d_biases[layer] = dz.sum(axis=0)
        if layer == 0:
            break
        dm = dz @ model.weights[layer].T
        dh = a_hat.T @ dm
        dz = dh * (cache["pre_activations"][layer - 1] > 0)
    return d_weights, d_biases


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def generated_utilities(positions, evader_samples, capture_radius):
    """Differentiable utility evaluation of generated positions.

    The generated heading points from each position toward the arena origin
    (velocity = -position). Returns (y, cache) where y is the mean of the
    per-pursuer normalised utility rows.
    """
    p = np.asarray(positions, dtype=float)
    samples = np.asarray(evader_samples, dtype=float)
    n = p.shape[0]
    v = -p
    diff = samples[:, None, :, :] - p[None, :, None, :]   # (S, n, m, 2)
    dist = np.linalg.norm(diff, axis=3)
    dist_safe = np.maximum(dist, 1e-12)
    nearest = dist.argmin(axis=2)                          # (S, n)
    s_idx, n_idx = np.ogrid[:dist.shape[0], :n]
    d_min = dist[s_idx, n_idx, nearest]

    sig = _sigmoid((capture_radius - d_min) / capture_radius)
    capture = 2.0 * sig

    v_norm = np.linalg.norm(v, axis=1)
    num = np.einsum("snmk,nk->snm", diff, v)
    den = v_norm[None, :, None] * dist + ANGLE_EPS
    cos_raw = num / den
    cos = np.clip(cos_raw, -1.0, 1.0)
    angles = np.arccos(cos)

    per_pursuer = np.stack([capture.mean(axis=0),
                            d_min.mean(axis=0),
                            angles.mean(axis=(0, 2)) / np.pi], axis=1)
    totals = per_pursuer.sum(axis=1, keepdims=True)
    normalized = per_pursuer / totals
    y = normalized.mean(axis=0)
    cache = dict(p=p, v=v, diff=diff, dist=dist, dist_safe=dist_safe,
                 nearest=nearest, sig=sig, num=num, den=den,
                 cos_raw=cos_raw, cos=cos, v_norm=v_norm,
                 per_pursuer=per_pursuer, totals=totals,
                 normalized=normalized, capture_radius=capture_radius)
    return y, cache


def _utilities_backward(dy, cache):
    """dLoss/dPositions given dLoss/dy, via the cached utility forward."""
    p = cache["p"]
    diff = cache["diff"]
    dist = cache["dist"]
    dist_safe = cache["dist_safe"]
    nearest = cache["nearest"]
    n = p.shape[0]
    n_samples, _, n_evaders = dist.shape

    d_normalized = np.tile(dy / n, (n, 1))
    inner = (d_normalized * cache["normalized"]).sum(axis=1, keepdims=True)
    d_per_pursuer = (d_normalized - inner) / cache["totals"]

    d_capture = np.tile(d_per_pursuer[:, 0] / n_samples, (n_samples, 1))
    d_dmin = np.tile(d_per_pursuer[:, 1] / n_samples, (n_samples, 1))
    d_angles = np.tile(
        d_per_pursuer[:, 2][None, :, None] / (n_samples * n_evaders * np.pi),
        (n_samples, 1, n_evaders))

    # capture = 2 * sigmoid((r - dmin) / r)
    r = cache["capture_radius"]
    sig = cache["sig"]
    d_dmin = d_dmin + d_capture * 2.0 * sig * (1.0 - sig) * (-1.0 / r)

    # angles = arccos(clip(num / den)); zero slope where clipped/saturated
    cos = cache["cos"]
    slope_mask = (np.abs(cache["cos_raw"]) < 1.0) & (1.0 - cos ** 2 > 1e-12)
    d_cos = np.where(slope_mask,
                     -d_angles / np.sqrt(np.maximum(1.0 - cos ** 2, 1e-12)),
                     0.0)
    den = cache["den"]
    num = cache["num"]
    d_num = d_cos / den
    d_den = -d_cos * num / den ** 2

    v = cache["v"]
    v_norm = cache["v_norm"]
    v_unit = np.where(v_norm[:, None] > 1e-12,
                      v / np.maximum(v_norm, 1e-12)[:, None], 0.0)
    # num = diff . v ; den = |v| dist + eps
    d_diff = d_num[..., None] * v[None, :, None, :] \
        + (d_den * v_norm[None, :, None])[..., None] * diff / dist_safe[..., None]
    d_v = np.einsum("snm,snmk->nk", d_num, diff) \
        + np.einsum("snm,nk->nk", d_den * dist, v_unit)

    # dmin picks the nearest evader's distance
    s_idx, n_idx = np.ogrid[:n_samples, :n]
    grad_min = d_dmin[..., None] * (diff[s_idx, n_idx, nearest]
                                    / dist_safe[s_idx, n_idx, nearest][..., None])
    d_diff2 = np.zeros_like(diff)
    d_diff2[s_idx, n_idx, nearest] = grad_min

    # diff = e - p and v = -p
    d_positions = -(d_diff + d_diff2).sum(axis=(0, 2)) - d_v
    return d_positions


def pareto_loss(generated, front):
    """Distance from the aggregated utility vector to the nearest front point.

    ``generated`` is a 3-vector (or FeatureVector); ``front`` is a ParetoFront
    or a raw (m, 3) feature matrix.
    """
    y = generated.as_array() if hasattr(generated, "as_array") \
        else np.asarray(generated, dtype=float)
    matrix = front if isinstance(front, np.ndarray) else front.feature_matrix()
    if matrix.size == 0:
        raise ValueError("Pareto front must be non-empty")
    return float(np.min(np.linalg.norm(matrix - y, axis=1)))


def _loss_and_position_grad(positions, front_matrix, evader_samples,
                            capture_radius):
    y, cache = generated_utilities(positions, evader_samples, capture_radius)
    deltas = y - front_matrix
    norms = np.linalg.norm(deltas, axis=1)
    j = int(np.argmin(norms))
    loss = float(norms[j])
    if loss > 1e-12:
        dy = deltas[j] / loss
        d_positions = _utilities_backward(dy, cache)
    else:
        d_positions = np.zeros_like(positions)
    return loss, d_positions, y


def graph_loss_and_grads(model, graph, front_matrix, evader_samples,
                         capture_radius):
    """Pareto loss of one graph plus parameter gradients."""
    positions, cache = _forward_cached(model, graph)
    loss, d_positions, y = _loss_and_position_grad(
        positions, front_matrix, evader_samples, capture_radius)
    d_weights, d_biases = _backward(model, cache, d_positions)
    return loss, d_weights, d_biases, y


def generated_feature_vector(positions, game_type, evader_samples,
                             capture_radius=0.1):
    """Aggregated utility vector of raw positions with origin-facing headings.

    Matches the training-time utility path but goes through the plain
    feature code, so tests can cross-check the two.
    """
    positions = np.asarray(positions, dtype=float)
    config = Configuration.from_arrays(positions, -positions, capture_radius,
                                       game_type)
    return per_pursuer_normalized(config, evader_samples).mean(axis=0)


class Adam:
    """Adam with decoupled weight decay (applied to weight matrices only)."""

    def __init__(self, model, learning_rate, weight_decay=0.0,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.model = model
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        params = model.parameters()
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, d_weights, d_biases):
        self.t += 1
        grads = list(d_weights) + list(d_biases)
        params = self.model.parameters()
        n_weights = len(d_weights)
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g ** 2
            m_hat = self.m[k] / (1 - self.beta1 ** self.t)
            v_hat = self.v[k] / (1 - self.beta2 ** self.t)
            update = self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
            if k < n_weights and self.weight_decay:
                update = update + self.learning_rate * self.weight_decay * p
            p -= update


@dataclass
class TrainTrace:
    """Per-epoch mean loss and probe-set hypervolume."""

    losses: list = field(default_factory=list)
    hypervolumes: list = field(default_factory=list)

    def to_dict(self):
        return {"losses": self.losses, "hypervolumes": self.hypervolumes}


def _front_matrices(fronts):
    out = {}
    for key, front in fronts.items():
        gt = parse_game_type(key) if isinstance(key, str) else tuple(key)
        out[gt] = front if isinstance(front, np.ndarray) \
            else front.feature_matrix()
    return out


def _probe_hypervolume(model, graphs, samples_by_type, capture_radius):
    """Hypervolume of the generated probe set in the unit objective box.

    Objectives are (1 - capture, distance, 1 - heading) with reference point
    (1, 1, 1); all three lie in [0, 1] because the utilities sum to one.
    """
    ys = []
    for graph in graphs:
        positions = gcn_forward(model, graph)
        y, _ = generated_utilities(positions, samples_by_type[graph.game_type],
                                   capture_radius)
        ys.append(y)
    ys = np.array(ys)
    objectives = np.column_stack(
        [1.0 - ys[:, 0], ys[:, 1], 1.0 - ys[:, 2]])
    return hypervolume(objectives, np.array([1.0, 1.0, 1.0]))


def train(dataset, fronts, config=None, capture_radius=0.1,
          probe_size=64):
    """Fit the network to the stacked fronts; returns (model, trace).

    ``dataset`` is a list of ConfigGraph, ``fronts`` maps game type (tuple or
    "PxE" string) to the ParetoFront whose members supervise that game type.
    Deterministic for a given config seed and dataset order.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    config = config or TrainConfig()
    front_matrices = _front_matrices(fronts)
    game_types = {g.game_type for g in dataset}
    missing = game_types - set(front_matrices)
    if missing:
        raise ValueError(f"no Pareto front for game types {sorted(missing)}")
    samples_by_type = {gt: evader_position_samples(gt) for gt in game_types}

    model = GcnModel.initialize(seed=config.seed)
    ranges = np.stack([
        np.min([g.node_features.min(axis=0) for g in dataset], axis=0),
        np.max([g.node_features.max(axis=0) for g in dataset], axis=0),
    ], axis=1)
    model.feature_ranges = ranges

    optimizer = Adam(model, config.learning_rate, config.weight_decay)
    rng = np.random.default_rng(config.seed)
    trace = TrainTrace()
    probe = dataset[:min(probe_size, len(dataset))]

    for _ in range(config.epochs):
        order = rng.permutation(len(dataset))
        epoch_losses = []
        for start in range(0, len(dataset), config.batch_size):
            batch = order[start:start + config.batch_size]
            acc_w = [np.zeros_like(w) for w in model.weights]
            acc_b = [np.zeros_like(b) for b in model.biases]
            batch_loss = 0.0
            for idx in batch:
                graph = dataset[idx]
                loss, d_w, d_b, _ = graph_loss_and_grads(
                    model, graph, front_matrices[graph.game_type],
                    samples_by_type[graph.game_type], capture_radius)
                batch_loss += loss
                for k in range(len(acc_w)):
                    acc_w[k] += d_w[k]
                    acc_b[k] += d_b[k]
            scale = 1.0 / len(batch)
            optimizer.step([g * scale for g in acc_w],
                           [g * scale for g in acc_b])
            epoch_losses.append(batch_loss * scale)
        trace.losses.append(float(np.mean(epoch_losses)))
        trace.hypervolumes.append(
            _probe_hypervolume(model, probe, samples_by_type, capture_radius))
    return model, trace


def mean_pareto_loss(model, graphs, fronts, capture_radius=0.1):
    """Mean Pareto loss of the model's outputs over a set of graphs."""
    front_matrices = _front_matrices(fronts)
    samples = {g.game_type: evader_position_samples(g.game_type)
               for g in graphs}
    losses = []
    for graph in graphs:
        positions = gcn_forward(model, graph)
        y, _ = generated_utilities(positions, samples[graph.game_type],
                                   capture_radius)
        losses.append(pareto_loss(y, front_matrices[graph.game_type]))
    return float(np.mean(losses))


# ---------------------------------------------------------------------------
# Hot-start generation
# ---------------------------------------------------------------------------

@dataclass
class HotStart:
    """A generated pursuer placement plus provenance."""

    positions: np.ndarray        # (n, 2)
    headings: np.ndarray         # (n,) radians, facing the arena origin
    game_type: str
    sample_id: int
    model_hash: str
    seed: int

    def to_configuration(self, scenario):
        velocities = scenario.pursuer_speed * np.column_stack(
            [np.cos(self.headings), np.sin(self.headings)])
        n_p, n_e = parse_game_type(self.game_type)
        return Configuration.from_arrays(
            self.positions, velocities, scenario.capture_radius, (n_p, n_e))


def generate_hot_starts(model, n_pursuers, count=1000, rng_seed=0,
                        game_type=None):
    """Query the network ``count`` times with noise inputs.

    Each query builds a fully connected unit-weight graph of ``n_pursuers``
    nodes whose features are uniform draws over the model's recorded feature
    ranges; the network's output rows are the proposed positions, and each
    heading points from its position toward the arena origin.
    """
    if not 2 <= n_pursuers <= 5:
        raise ValueError("n_pursuers must be in 2..5")
    label = game_type if game_type is not None else f"{n_pursuers}p"
    gt_tuple = parse_game_type(game_type) if game_type is not None \
        else (n_pursuers, 1)
    if gt_tuple[0] != n_pursuers:
        raise ValueError("game_type disagrees with n_pursuers")
    rng = np.random.default_rng(rng_seed)
    lo = model.feature_ranges[:, 0]
    hi = model.feature_ranges[:, 1]
    edges = [(i, j, 1.0) for i in range(n_pursuers)
             for j in range(i + 1, n_pursuers)]
    model_hash = model.hash()
    out = []
    for sample_id in range(count):
        features = rng.uniform(lo, hi, size=(n_pursuers, NODE_FEATURE_DIM))
        graph = ConfigGraph(node_features=features, edges=edges,
                            game_type=gt_tuple)
        positions = gcn_forward(model, graph)
        headings = np.arctan2(-positions[:, 1], -positions[:, 0])
        out.append(HotStart(positions=positions, headings=headings,
                            game_type=label, sample_id=sample_id,
                            model_hash=model_hash, seed=rng_seed))
    return out


def hot_starts_to_csv(hot_starts, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["game_type", "sample_id", "pursuer_id",
                         "x", "y", "heading"])
        for hs in hot_starts:
            for i, (pos, heading) in enumerate(zip(hs.positions, hs.headings)):
                writer.writerow([hs.game_type, hs.sample_id, i,
                                 repr(float(pos[0])), repr(float(pos[1])),
                                 repr(float(heading))])


def hot_starts_from_csv(path):
    """Rebuild HotStart records (positions/headings only) from the CSV."""
    rows = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["game_type"], int(row["sample_id"]))
            rows.setdefault(key, []).append(
                (int(row["pursuer_id"]), float(row["x"]), float(row["y"]),
                 float(row["heading"])))
    out = []
    for (game_type, sample_id), entries in sorted(rows.items(),
                                                  key=lambda kv: kv[0][1]):
        entries.sort()
        positions = np.array([[x, y] for _, x, y, _ in entries])
        headings = np.array([h for _, _, _, h in entries])
        out.append(HotStart(positions=positions, headings=headings,
                            game_type=game_type, sample_id=sample_id,
                            model_hash="", seed=-1))
    return out
