"""Six-stage pipeline: simulate, build-gfs, train, generate, evaluate, report.

Every stage reads only artifacts written by earlier stages, derives all of
its randomness from the master seed, and embeds (stage, seed, config hash)
in its manifest and in every JSON artifact, so re-running a stage with
unchanged inputs reproduces identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .controllers import make_policies
from .features import Configuration, ParetoFront, evader_position_samples
from .gcn import (GcnModel, TrainConfig, generate_hot_starts,
                  generated_feature_vector, hot_starts_from_csv,
                  hot_starts_to_csv, train)
from .geometry import containment, heatmap_accumulate
from .graphs import ConfigGraph, graphs_from_front, load_dataset, save_dataset
from .indicators import indicator_report
from .nsga2 import nsga2_optimize
from .survival import kaplan_meier, log_rank
from .world import (GAME_TYPES, WORLD_MAX, WORLD_MIN, AgentState, EpisodeLog,
                    Scenario, parse_game_type, run_episode)

STAGE_CODES = {"simulate": 1, "build-gfs": 2, "train": 3,
               "generate": 4, "evaluate": 5, "report": 6}


class PipelineError(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    """Everything the six stages need, with desk-scale knobs."""

    out_dir: str = "pipeline_out"
    master_seed: int = 0
    game_types: list = field(default_factory=lambda: list(GAME_TYPES))
    capture_radius: float = 0.1
    dt: float = 0.05
    horizon: int = 40
    grid_resolution: int = 41
    control_alpha: float = 0.5
    episodes_per_type: int = 10
    population_size: int = 500
    generations: int = 200
    batch_size: int = 1024
    learning_rate: float = 1e-4
    weight_decay: float = 1e-2
    epochs: int = 150
    generate_count: int = 1000
    eval_batches: int = 10
    eval_batch_size: int = 100
    workers: int = 1

    def __post_init__(self):
        unknown = [g for g in self.game_types if g not in GAME_TYPES]
        if unknown:
            raise PipelineError(f"unsupported game types: {unknown}")

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        bad = set(data) - known
        if bad:
            raise PipelineError(f"unknown config keys: {sorted(bad)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        if path.suffix.lower() == ".toml":
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        else:
            with open(path) as fh:
                data = json.load(fh)
        return cls.from_dict(data.get("pipeline", data))

    def config_hash(self):
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]

    def scenario(self, game_type):
        return Scenario.for_game_type(
            game_type, capture_radius=self.capture_radius, dt=self.dt,
            horizon=self.horizon)

    def rng(self, stage, *indices):
        return np.random.default_rng(
            [self.master_seed, STAGE_CODES[stage], *indices])

    def meta(self, stage):
        return {"stage": stage, "seed": self.master_seed,
                "config_hash": self.config_hash()}

    def out(self):
        return Path(self.out_dir)


def _write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)


def _write_manifest(config, stage, files):
    manifest = dict(config.meta(stage))
    manifest["files"] = sorted(str(f) for f in files)
    _write_json(config.out() / f"manifest_{stage.replace('-', '_')}.json",
                manifest)


def _require(path, producing_stage):
    if not Path(path).exists():
        raise PipelineError(
            f"missing artifact {path}; run the '{producing_stage}' stage first")
    return Path(path)


def random_configuration(rng, scenario):
    """Uniform-random baseline placement with uniform-random headings."""
    n = scenario.n_pursuers
    positions = rng.uniform(WORLD_MIN, WORLD_MAX, size=(n, 2))
    headings = rng.uniform(-np.pi, np.pi, size=n)
    velocities = scenario.pursuer_speed * np.column_stack(
        [np.cos(headings), np.sin(headings)])
    return Configuration.from_arrays(
        positions, velocities, scenario.capture_radius,
        (n, scenario.n_evaders))


def random_evader_states(rng, scenario):
    positions = rng.uniform(WORLD_MIN, WORLD_MAX,
                            size=(scenario.n_evaders, 2))
    return [AgentState(p, np.zeros(2)) for p in positions]


def _play(scenario_dict, config_dict, evader_rows, seed, resolution, alpha):
    """Worker-friendly episode runner (plain dict/list arguments)."""
    scenario = Scenario.from_dict(scenario_dict)
    config = Configuration.from_dict(config_dict)
    evaders = [AgentState.from_list(row) for row in evader_rows]
    pursuer_policy, evader_policy = make_policies(
        scenario, alpha=alpha, resolution=resolution)
    return run_episode(scenario, pursuer_policy, evader_policy, config,
                       evaders, rng_seed=seed)


def _pool_map(fn, jobs, workers):
    """Order-preserving map, optionally across a process pool."""
    if workers <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def cmd_simulate(config):
    """Stage 1: run seeded episodes of the control laws per game type."""
    out = config.out() / "sim"
    files = []
    for gt_index, game_type in enumerate(config.game_types):
        scenario = config.scenario(game_type)
        jobs = []
        for episode in range(config.episodes_per_type):
            rng = config.rng("simulate", gt_index, episode)
            start = random_configuration(rng, scenario)
            evaders = random_evader_states(rng, scenario)
            seed = int(rng.integers(0, 2 ** 31))
            jobs.append((scenario.to_dict(), start.to_dict(),
                         [e.to_list() for e in evaders], seed,
                         config.grid_resolution, config.control_alpha))
        logs = _pool_map(_play, jobs, config.workers)
        (out / game_type).mkdir(parents=True, exist_ok=True)
        for episode, log in enumerate(logs):
            path = out / game_type / f"ep_{episode:04d}.jsonl"
            _write_episode(log, path, config.meta("simulate"))
            files.append(path)
    _write_manifest(config, "simulate", files)
    return files


def _write_episode(log, path, meta):
    with open(path, "w") as fh:
        header = {"scenario": log.scenario.to_dict(), "seed": log.seed,
                  "meta": meta}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for record in log.steps:
            fh.write(json.dumps(record.to_json_obj(), sort_keys=True) + "\n")


def cmd_build_gfs(config):
    """Stage 2: NSGA-II fronts per game type plus the stacked graph dataset."""
    out = config.out()
    front_dir = out / "fronts"
    front_dir.mkdir(parents=True, exist_ok=True)
    files = []
    all_graphs = []
    for gt_index, game_type in enumerate(config.game_types):
        samples = evader_position_samples(game_type)
        seed = int(config.rng("build-gfs", gt_index).integers(0, 2 ** 31))
        front = nsga2_optimize(
            game_type, samples, population_size=config.population_size,
            generations=config.generations, rng_seed=seed,
            capture_radius=config.capture_radius)
        json_path = front_dir / f"{game_type}.json"
        front.to_json(json_path)
        _annotate_json(json_path, config.meta("build-gfs"))
        csv_path = front_dir / f"{game_type}.csv"
        front.to_csv(csv_path)
        files.extend([json_path, csv_path])
        noise_rng = config.rng("build-gfs", gt_index, 1)
        all_graphs.extend(graphs_from_front(front, samples, rng=noise_rng))
    dataset_path = out / "dataset.json"
    save_dataset(all_graphs, dataset_path)
    _annotate_json(dataset_path, config.meta("build-gfs"))
    files.append(dataset_path)
    _write_manifest(config, "build-gfs", files)
    return files


def _annotate_json(path, meta):
    """Embed the stage meta in an existing JSON artifact."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, list):
        data = {"items": data}
    data["meta"] = meta
    _write_json(Path(path), data)


def _load_annotated(path):
    with open(path) as fh:
        data = json.load(fh)
    return data.get("items", data)


def load_fronts(config):
    fronts = {}
    for game_type in config.game_types:
        path = _require(config.out() / "fronts" / f"{game_type}.json",
                        "build-gfs")
        fronts[parse_game_type(game_type)] = ParetoFront.from_json(path)
    return fronts


def cmd_train(config):
    """Stage 3: fit the network on the stacked fronts."""
    dataset_path = _require(config.out() / "dataset.json", "build-gfs")
    dataset = load_dataset(dataset_path)
    fronts = load_fronts(config)
    train_config = TrainConfig(
        batch_size=config.batch_size, learning_rate=config.learning_rate,
        weight_decay=config.weight_decay, epochs=config.epochs,
        seed=int(config.rng("train").integers(0, 2 ** 31)))
    model, trace = train(dataset, fronts, train_config,
                         capture_radius=config.capture_radius)
    model_path = config.out() / "model.json"
    model.save(model_path)
    trace_path = config.out() / "train_trace.json"
    _write_json(trace_path, dict(config.meta("train"), **trace.to_dict()))
    _write_manifest(config, "train", [model_path, trace_path])
    return model, trace


def cmd_generate(config):
    """Stage 4: hot-start CSVs per game type."""
    model_path = _require(config.out() / "model.json", "train")
    model = GcnModel.load(model_path)
    out = config.out() / "hot_starts"
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for gt_index, game_type in enumerate(config.game_types):
        n_pursuers, _ = parse_game_type(game_type)
        seed = int(config.rng("generate", gt_index).integers(0, 2 ** 31))
        starts = generate_hot_starts(model, n_pursuers,
                                     count=config.generate_count,
                                     rng_seed=seed, game_type=game_type)
        path = out / f"{game_type}.csv"
        hot_starts_to_csv(starts, path)
        files.append(path)
    _write_manifest(config, "generate", files)
    return files


def cmd_evaluate(config):
    """Stage 5: paired hot-start vs random-start episode batches.

    Both arms of a pair share the evader initial states and the episode
    seed, so the only difference is the pursuer placement.
    """
    out = config.out() / "eval"
    files = []
    n_episodes = config.eval_batches * config.eval_batch_size
    for gt_index, game_type in enumerate(config.game_types):
        starts_path = _require(
            config.out() / "hot_starts" / f"{game_type}.csv", "generate")
        hot_starts = hot_starts_from_csv(starts_path)
        scenario = config.scenario(game_type)
        gt_dir = out / game_type
        gt_dir.mkdir(parents=True, exist_ok=True)
        jobs = {"hot": [], "random": []}
        for episode in range(n_episodes):
            rng = config.rng("evaluate", gt_index, episode)
            evaders = random_evader_states(rng, scenario)
            evader_rows = [e.to_list() for e in evaders]
            seed = int(rng.integers(0, 2 ** 31))
            hot = hot_starts[int(rng.integers(0, len(hot_starts)))]
            hot_config = hot.to_configuration(scenario)
            rand_config = random_configuration(rng, scenario)
            common = (evader_rows, seed, config.grid_resolution,
                      config.control_alpha)
            jobs["hot"].append(
                (scenario.to_dict(), hot_config.to_dict()) + common)
            jobs["random"].append(
                (scenario.to_dict(), rand_config.to_dict()) + common)
        capture_times = {}
        for arm in ("hot", "random"):
            logs = _pool_map(_play, jobs[arm], config.workers)
            times = []
            for episode, log in enumerate(logs):
                path = gt_dir / f"{arm}_{episode:04d}.jsonl"
                _write_episode(log, path, config.meta("evaluate"))
                files.append(path)
                times.extend([t, bool(c)] for t, c in log.capture_times())
            capture_times[arm] = times
        times_path = gt_dir / "capture_times.json"
        _write_json(times_path, dict(config.meta("evaluate"),
                                     batches=config.eval_batches,
                                     batch_size=config.eval_batch_size,
                                     **capture_times))
        files.append(times_path)
    _write_manifest(config, "evaluate", files)
    return files


def _arm_logs(config, game_type, arm):
    gt_dir = config.out() / "eval" / game_type
    paths = sorted(gt_dir.glob(f"{arm}_*.jsonl"))
    return [EpisodeLog.from_jsonl(p) for p in paths]


def _containment_table(logs, horizon):
    """Per-step containment fraction and mean hull area across episodes."""
    inside = np.zeros(horizon + 1)
    area = np.zeros(horizon + 1)
    count = np.zeros(horizon + 1)
    for log in logs:
        for record in log.steps:
            if not record.evaders:
                continue
            evader = next(iter(record.evaders.values()))
            is_in, hull_area = containment(
                [p.position for p in record.pursuers], evader.position)
            inside[record.step] += is_in
            area[record.step] += hull_area
            count[record.step] += 1
    rows = []
    for step in range(horizon + 1):
        if count[step]:
            rows.append((step, inside[step] / count[step],
                         area[step] / count[step]))
    return rows


def cmd_report(config):
    """Stage 6: survival curves, log-rank tests, heatmaps, containment and
    front-quality indicators."""
    report_dir = config.out() / "report"
    files = []
    summary = dict(config.meta("report"), game_types={})
    fronts = load_fronts(config)
    for game_type in config.game_types:
        times_path = _require(
            config.out() / "eval" / game_type / "capture_times.json",
            "evaluate")
        with open(times_path) as fh:
            payload = json.load(fh)
        gt_dir = report_dir / game_type
        gt_dir.mkdir(parents=True, exist_ok=True)
        scenario = config.scenario(game_type)
        curves = {}
        for arm in ("hot", "random"):
            data = [(t, bool(c)) for t, c in payload[arm]]
            curves[arm] = kaplan_meier(data, config.horizon)
            path = gt_dir / f"survival_{arm}.csv"
            curves[arm].to_csv(path)
            files.append(path)
        chi2, p_value = log_rank([(t, bool(c)) for t, c in payload["hot"]],
                                 [(t, bool(c)) for t, c in payload["random"]])
        logrank_path = gt_dir / "logrank.json"
        _write_json(logrank_path, dict(config.meta("report"),
                                       chi_square=chi2, p_value=p_value))
        files.append(logrank_path)

        for arm in ("hot", "random"):
            logs = _arm_logs(config, game_type, arm)
            heatmap = heatmap_accumulate(logs, resolution=64)
            for suffix, writer in (("csv", heatmap.to_csv),
                                   ("pgm", heatmap.to_pgm)):
                path = gt_dir / f"heatmap_{arm}.{suffix}"
                writer(path)
                files.append(path)
            if scenario.n_evaders == 1:
                rows = _containment_table(logs, config.horizon)
                path = gt_dir / f"containment_{arm}.csv"
                with open(path, "w") as fh:
                    fh.write("step,fraction_inside,mean_hull_area\n")
                    for step, frac, hull_area in rows:
                        fh.write(f"{step},{frac:.6f},{hull_area:.6f}\n")
                files.append(path)

        starts = hot_starts_from_csv(
            config.out() / "hot_starts" / f"{game_type}.csv")
        samples = evader_position_samples(game_type)
        gt_tuple = parse_game_type(game_type)
        generated = np.array([
            generated_feature_vector(hs.positions, gt_tuple, samples,
                                     config.capture_radius)
            for hs in starts])
        truth = fronts[gt_tuple].feature_matrix()
        to_objectives = lambda m: np.column_stack(
            [1.0 - m[:, 0], m[:, 1], 1.0 - m[:, 2]])
        report = indicator_report(to_objectives(generated),
                                  to_objectives(truth), (1.0, 1.0, 1.0))
        indicators_path = gt_dir / "indicators.json"
        _write_json(indicators_path, dict(config.meta("report"),
                                          **report.to_dict()))
        files.append(indicators_path)

        summary["game_types"][game_type] = {
            "log_rank_chi_square": chi2,
            "log_rank_p_value": p_value,
            "survival_at_horizon_hot":
                curves["hot"].survival_at(config.horizon),
            "survival_at_horizon_random":
                curves["random"].survival_at(config.horizon),
            "hypervolume": report.hypervolume,
        }
    summary_path = report_dir / "summary.json"
    _write_json(summary_path, summary)
    files.append(summary_path)
    _write_manifest(config, "report", files)
    return summary


STAGES = {
    "simulate": cmd_simulate,
    "build-gfs": cmd_build_gfs,
    "train": cmd_train,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def run_stage(config, stage):
    if stage not in STAGES:
        raise PipelineError(f"unknown stage {stage!r}")
    return STAGES[stage](config)


def run_all(config):
    result = None
    for stage in STAGES:
        result = STAGES[stage](config)
    return result
