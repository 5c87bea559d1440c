"""Experiment orchestration: config files, seeded runs, sweeps, comparisons.

Configuration is a JSON document of six sections (scenario, semantic,
reward, learner, run, sweep), each mapping onto one config dataclass.
Every field has a default; the resolved config emitted next to results
marks whether each default came from the published parameter tables or
from this artifact's own choices ("ledger"). All result files embed the
resolved-config hash so aggregation across mismatched configs is refused.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import marl, oracle
from .channel import ScenarioConfig
from .env import PlatoonEnv, RewardConfig
from .marl import LearnerConfig, TrainingMetrics
from .semantics import SemanticConfig

SCHEMA_EPISODES = "episodes-v1"
SCHEMA_SWEEP = "sweep-v1"
CHECKPOINT_VERSION = 1
OUTPUT_ROOT_ENV = "PLATOONSC_OUT"


class ConfigError(ValueError):
    """Configuration rejected; message carries the offending key path."""


@dataclass(frozen=True)
class RunSettings:
    """Run-level knobs that do not alter the modelled system."""

    seed: int = 0
    output_dir: str | None = None      # None -> $PLATOONSC_OUT or ./runs
    deterministic: bool = True
    eval_only: bool = False
    checkpoint: str | None = None
    eval_episodes: int = 20

    def validate(self) -> None:
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        if self.eval_only and not self.checkpoint:
            raise ValueError("eval_only requires a checkpoint path")


@dataclass(frozen=True)
class SweepSettings:
    """Optional sweep plan; CLI flags override these fields."""

    parameter: str | None = None
    values: tuple = ()
    seeds: tuple = (0, 1, 2, 3, 4)
    episodes_per_point: int | None = None
    algorithms: tuple | None = None

    def validate(self) -> None:
        if self.parameter is not None and not self.values:
            raise ValueError("sweep with a parameter needs values")
        if self.episodes_per_point is not None and self.episodes_per_point < 0:
            raise ValueError("episodes_per_point must be >= 0")
        if not self.seeds:
            raise ValueError("sweep needs at least one seed")


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    semantic: SemanticConfig = field(default_factory=SemanticConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    run: RunSettings = field(default_factory=RunSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)

    def validate(self) -> None:
        for name in _SECTIONS:
            try:
                getattr(self, name).validate()
            except ValueError as e:
                raise ConfigError(f"{name}: {e}") from e

    def output_dir(self) -> Path:
        if self.run.output_dir:
            return Path(self.run.output_dir)
        return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


_SECTIONS = {
    "scenario": ScenarioConfig,
    "semantic": SemanticConfig,
    "reward": RewardConfig,
    "learner": LearnerConfig,
    "run": RunSettings,
    "sweep": SweepSettings,
}

# provenance of each default: published parameter tables vs. this artifact
FIELD_SOURCES = {
    "scenario.map_width_m": "paper", "scenario.map_height_m": "paper",
    "scenario.lane_width_m": "paper", "scenario.intersection_spacing_m": "paper",
    "scenario.n_platoons": "table1", "scenario.platoon_size": "table1",
    "scenario.gap_m": "table1", "scenario.speed_mps": "table1",
    "scenario.n_subchannels": "table1",
    "scenario.subchannel_bandwidth_hz": "table1",
    "scenario.carrier_hz": "table1", "scenario.max_power_dbm": "table1",
    "scenario.noise_dbm": "table1", "scenario.bs_antenna_height_m": "table1",
    "scenario.vehicle_antenna_height_m": "table1",
    "scenario.bs_antenna_gain_dbi": "table1",
    "scenario.vehicle_antenna_gain_dbi": "table1",
    "scenario.bs_noise_figure_db": "table1",
    "scenario.vehicle_noise_figure_db": "table1",
    "semantic.bandwidth_hz": "table1", "semantic.u_max_text": "table1",
    "semantic.u_max_image": "table1", "semantic.payload_suts": "paper",
    "reward.transform_factor_bits": "paper", "reward.score_threshold": "table1",
    "learner.actor_hidden": "table2", "learner.critic_hidden": "table2",
    "learner.critic_lr": "table2", "learner.actor_lr": "table2",
    "learner.gamma": "table2", "learner.tau": "table2",
    "learner.policy_delay": "table2", "learner.batch_size": "table2",
    "learner.buffer_capacity": "table2", "learner.noise_std": "table2",
    "learner.episodes": "table2", "learner.slots_per_episode": "table2",
}


def _coerce(section: str, name: str, ftype, value):
    path = f"{section}.{name}"
    origin = getattr(ftype, "__origin__", None)
    if value is None:
        return None
    if ftype in (float, "float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if ftype in (int, "int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if ftype in (bool, "bool"):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if ftype in (str, "str"):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if origin is tuple or "tuple" in str(ftype):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return tuple(value)
    if "int" in str(ftype):      # optional ints (e.g. "int | None")
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if "str" in str(ftype):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if "float" in str(ftype):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    return value


def parse_config(source) -> RunConfig:
    """Parse a config from a JSON file path or a JSON text string.

    Unknown sections or keys are rejected with their key path; every
    omitted field takes its table/ledger default. An empty document is
    the full default configuration.
    """
    if isinstance(source, Path):
        text = source.read_text()
    else:
        text = str(source)
        looks_like_path = (text.strip() and "{" not in text
                           and "\n" not in text and len(text) < 4096)
        if looks_like_path:
            p = Path(text)
            if not p.exists():
                raise ConfigError(f"config file not found: {text}")
            text = p.read_text()
    text = text.strip() or "{}"
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")

    sections = {}
    for key, value in data.items():
        if key.startswith("_"):
            continue  # emitted metadata (e.g. _sources) round-trips silently
        if key not in _SECTIONS:
            raise ConfigError(f"{key}: unknown section")
        cls = _SECTIONS[key]
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: section must be an object")
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for k, v in value.items():
            if k not in fields:
                raise ConfigError(f"{key}.{k}: unknown key")
            kwargs[k] = _coerce(key, k, fields[k].type, v)
        try:
            sections[key] = cls(**kwargs)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{key}: {e}") from e
    cfg = RunConfig(**sections)
    cfg.validate()
    return cfg


def resolved_config(cfg: RunConfig) -> dict:
    """Fully expanded config dict, with a _sources provenance block."""
    out = {}
    sources = {}
    for name in _SECTIONS:
        section = dataclasses.asdict(getattr(cfg, name))
        for k, v in section.items():
            if isinstance(v, tuple):
                section[k] = list(v)
            sources[f"{name}.{k}"] = FIELD_SOURCES.get(f"{name}.{k}", "ledger")
        out[name] = section
    out["_sources"] = sources
    return out


def emit_config(cfg: RunConfig) -> str:
    return json.dumps(resolved_config(cfg), indent=1, sort_keys=True)


def _hash_dict(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def config_hash(cfg: RunConfig) -> str:
    """Hash over the modelled system and learner (seed excluded)."""
    r = resolved_config(cfg)
    return _hash_dict({k: r[k] for k in ("scenario", "semantic", "reward",
                                         "learner")})


def scenario_hash(cfg: RunConfig) -> str:
    """Hash over the modelled system only; equal across algorithms."""
    r = resolved_config(cfg)
    return _hash_dict({k: r[k] for k in ("scenario", "semantic", "reward")})


# file emission --------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def write_episodes_csv(path: Path, metrics: TrainingMetrics,
                       cfg_hash: str, scen_hash: str) -> None:
    lines = [f"# config_hash={cfg_hash} scenario_hash={scen_hash} "
             f"schema={SCHEMA_EPISODES}",
             ",".join(TrainingMetrics.COLUMNS)]
    lines += [",".join(_fmt(v) for v in row) for row in metrics.rows()]
    path.write_text("\n".join(lines) + "\n")


def read_episodes_csv(path: Path):
    """Returns (header dict, TrainingMetrics)."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing hash header")
    header = dict(item.split("=", 1) for item in lines[0][1:].split())
    if header.get("schema") != SCHEMA_EPISODES:
        raise ValueError(f"{path}: unexpected schema {header.get('schema')}")
    cols = lines[1].split(",")
    records = []
    for line in lines[2:]:
        if not line.strip():
            continue
        records.append({c: float(v) for c, v in zip(cols, line.split(","))})
    return header, TrainingMetrics.from_lists(records)


def aggregate_metrics(metrics: TrainingMetrics, tail_frac: float = 0.2) -> dict:
    """Mean metrics over the final window (last tail_frac of episodes)."""
    n = len(metrics.episode)
    tail = max(1, int(round(n * tail_frac)))
    return {
        "global_reward": float(np.mean(metrics.global_reward[-tail:])),
        "mean_qoe": float(np.mean(metrics.mean_qoe[-tail:])),
        "srs_rate": float(np.mean(metrics.srs_rate[-tail:])),
        "mean_delay_ms": float(np.mean(metrics.mean_delay_ms[-tail:])),
        "tail_episodes": tail,
    }


# checkpoints -----------------------------------------------------------------


def save_checkpoint(learner, path: Path, cfg_hash: str) -> None:
    """Parameter tensors with shape-carrying keys plus the RNG state.

    Stored as an npz archive (explicit dtype and endianness per entry),
    with a version tag and the config hash for provenance.
    """
    arrays = {"__version__": np.array([CHECKPOINT_VERSION]),
              "__config_hash__": np.array([cfg_hash])}
    for name, net in learner.named_networks().items():
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"{name}/w{i}"] = w
            arrays[f"{name}/b{i}"] = b
    rng_states = {}
    for attr in ("_rng_noise", "_rng_smooth"):
        rng = getattr(learner, attr, None)
        if rng is not None:
            rng_states[attr] = rng.bit_generator.state
    arrays["__rng__"] = np.array([json.dumps(rng_states)])
    np.savez(path, **arrays)


def load_checkpoint(learner, path: Path) -> None:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["__version__"][0])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"checkpoint version {version} unsupported")
        for name, net in learner.named_networks().items():
            for i in range(len(net.weights)):
                w = data[f"{name}/w{i}"]
                b = data[f"{name}/b{i}"]
                if w.shape != net.weights[i].shape:
                    raise ValueError(f"{name}/w{i}: shape {w.shape} != "
                                     f"{net.weights[i].shape}")
                net.weights[i][...] = w
                net.biases[i][...] = b
        rng_states = json.loads(str(data["__rng__"][0]))
    for attr, state in rng_states.items():
        rng = getattr(learner, attr, None)
        if rng is not None:
            rng.bit_generator.state = state


# runs ------------------------------------------------------------------------


def run(cfg: RunConfig) -> dict:
    """Execute one seeded run per the config; returns paths and aggregates."""
    cfg.validate()
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    h, sh = config_hash(cfg), scenario_hash(cfg)
    seed = cfg.run.seed
    stem = f"run_{h}_s{seed}"
    t0 = time.perf_counter()

    if cfg.run.eval_only:
        learner_cls, overrides = marl.baseline_variants(cfg.learner.algorithm)
        reward = (replace(cfg.reward, **overrides) if overrides else cfg.reward)
        ss = np.random.SeedSequence(seed).spawn(3)
        env = PlatoonEnv(cfg.scenario, cfg.semantic, reward,
                         seed=int(ss[0].generate_state(1)[0]))
        learner = learner_cls(env.n_agents, env.obs_dim, env.act_dim,
                              cfg.learner, seed=int(ss[1].generate_state(1)[0]))
        load_checkpoint(learner, Path(cfg.run.checkpoint))
        eval_seeds = [int(s.generate_state(1)[0])
                      for s in ss[2].spawn(cfg.run.eval_episodes)]
        metrics = marl.evaluate_policy(env, learner, cfg.run.eval_episodes,
                                       seeds=eval_seeds)
        checkpoint_path = None
    else:
        learner, metrics, _ = marl.train(
            cfg.learner.algorithm, cfg.scenario, cfg.semantic, cfg.reward,
            cfg.learner, seed=seed)
        checkpoint_path = out / f"{stem}_checkpoint.npz"
        save_checkpoint(learner, checkpoint_path, h)

    wall = time.perf_counter() - t0
    episodes_path = out / f"{stem}_episodes.csv"
    write_episodes_csv(episodes_path, metrics, h, sh)
    agg = aggregate_metrics(metrics)
    summary_path = out / f"{stem}_summary.txt"
    summary_lines = [
        f"algorithm: {cfg.learner.algorithm}",
        f"seed: {seed}",
        f"config_hash: {h}",
        f"scenario_hash: {sh}",
        f"episodes: {len(metrics.episode)}",
        f"eval_only: {cfg.run.eval_only}",
        *(f"final_{k}: {_fmt(v)}" for k, v in agg.items()),
        f"total_collisions: {int(np.sum(metrics.collisions))}",
        f"total_score_violations: {int(np.sum(metrics.score_violations))}",
        f"wall_time_s: {wall:.3f}",
        "resolved_config:",
        emit_config(cfg),
    ]
    summary_path.write_text("\n".join(summary_lines) + "\n")
    return {"episodes": episodes_path, "summary": summary_path,
            "checkpoint": checkpoint_path, "aggregates": agg,
            "metrics": metrics, "config_hash": h, "scenario_hash": sh}


# sweeps -----------------------------------------------------------------------

SWEEP_PARAMETERS = ("intra_platoon_gap", "semantic_demand_size",
                    "transform_factor")


def apply_sweep_value(cfg: RunConfig, parameter: str, value) -> RunConfig:
    """Return a config with the swept parameter set.

    ``transform_factor`` lands on the bit transform for the bit-pipe
    baseline and pins the semantic symbol length for every other
    algorithm, mirroring how the two metric families share that axis.
    """
    if parameter == "intra_platoon_gap":
        return replace(cfg, scenario=replace(cfg.scenario, gap_m=float(value)))
    if parameter == "semantic_demand_size":
        return replace(cfg, semantic=replace(cfg.semantic,
                                             payload_suts=float(value),
                                             payload_range_suts=None))
    if parameter == "transform_factor":
        if cfg.learner.algorithm == "ddpg_no_sc":
            return replace(cfg, reward=replace(
                cfg.reward, transform_factor_bits=int(value)))
        return replace(cfg, reward=replace(cfg.reward, u_fixed=int(value)))
    if "." in parameter:
        section, key = parameter.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"{parameter}: unknown section")
        target = getattr(cfg, section)
        if key not in {f.name for f in dataclasses.fields(target)}:
            raise ConfigError(f"{parameter}: unknown key")
        return replace(cfg, **{section: replace(target, **{key: value})})
    raise ConfigError(
        f"unsupported sweep parameter {parameter!r}; expected one of "
        f"{SWEEP_PARAMETERS} or section.key")


SWEEP_COLUMNS = ("parameter", "value", "algorithm", "seed", "global_reward",
                 "mean_qoe", "srs_rate", "mean_delay_ms")


def sweep(cfg: RunConfig, parameter: str | None = None, values=None,
          seeds=None, algorithms=None) -> Path:
    """Run the config across parameter values x algorithms x seeds.

    Arguments omitted here fall back to the config's sweep section. Emits
    one CSV with a row per run plus mean/std aggregate rows per
    (value, algorithm); aggregates are recomputable from the raw rows.
    """
    cfg.validate()
    parameter = parameter or cfg.sweep.parameter
    if parameter is None:
        raise ConfigError("no sweep parameter given (argument or sweep section)")
    values = tuple(values if values is not None else cfg.sweep.values)
    if not values:
        raise ConfigError("no sweep values given (argument or sweep section)")
    seeds = tuple(seeds if seeds is not None else cfg.sweep.seeds)
    if cfg.sweep.episodes_per_point is not None:
        cfg = replace(cfg, learner=replace(
            cfg.learner, episodes=cfg.sweep.episodes_per_point))
    algorithms = tuple(algorithms or cfg.sweep.algorithms
                       or (cfg.learner.algorithm,))
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        for algo in algorithms:
            algo_cfg = replace(cfg, learner=replace(cfg.learner, algorithm=algo))
            point_cfg = apply_sweep_value(algo_cfg, parameter, value)
            per_seed = []
            for seed in seeds:
                _, metrics, _ = marl.train(
                    algo, point_cfg.scenario, point_cfg.semantic,
                    point_cfg.reward, point_cfg.learner, seed=seed)
                agg = aggregate_metrics(metrics)
                row = (parameter, value, algo, seed, agg["global_reward"],
                       agg["mean_qoe"], agg["srs_rate"], agg["mean_delay_ms"])
                rows.append(row)
                per_seed.append(row[4:])
            data = np.array(per_seed, dtype=float)
            rows.append((parameter, value, algo, "mean", *data.mean(axis=0)))
            rows.append((parameter, value, algo, "std", *data.std(axis=0)))

    h = config_hash(cfg)
    path = out / f"sweep_{parameter}_{h}.csv"
    lines = [f"# config_hash={h} scenario_hash={scenario_hash(cfg)} "
             f"schema={SCHEMA_SWEEP}",
             ",".join(SWEEP_COLUMNS)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


# comparison ---------------------------------------------------------------------


def compare_algorithms(configs, seeds=(0, 1, 2, 3, 4)) -> dict:
    """Train each config over the shared seeds and report paired differences.

    All configs must describe the identical scenario (same scenario hash);
    the first config is the reference. Differences are descriptive only:
    per-seed deltas, their mean, and sign counts per metric.
    """
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configs")
    hashes = {scenario_hash(c) for c in configs}
    if len(hashes) > 1:
        raise ConfigError(f"mismatched scenarios: {sorted(hashes)}")
    results = {}
    for cfg in configs:
        algo = cfg.learner.algorithm
        per_seed = {}
        for seed in seeds:
            _, metrics, _ = marl.train(algo, cfg.scenario, cfg.semantic,
                                       cfg.reward, cfg.learner, seed=seed)
            per_seed[seed] = aggregate_metrics(metrics)
        results[algo] = per_seed
    report = comparison_report(results, seeds)
    report["scenario_hash"] = hashes.pop()
    return report


def comparison_report(results: dict, seeds) -> dict:
    """Paired per-seed differences of every algorithm vs. the first."""
    algos = list(results)
    base = algos[0]
    metrics = ("global_reward", "mean_qoe", "srs_rate", "mean_delay_ms")
    report = {"reference": base, "seeds": list(seeds), "pairs": {}}
    for algo in algos:
        entry = {}
        for metric in metrics:
            diffs = [results[algo][s][metric] - results[base][s][metric]
                     for s in seeds]
            entry[metric] = {
                "diffs": diffs,
                "mean_diff": float(np.mean(diffs)),
                "positive": int(sum(d > 0 for d in diffs)),
                "negative": int(sum(d < 0 for d in diffs)),
                "zero": int(sum(d == 0 for d in diffs)),
            }
        report["pairs"][algo] = entry
    return report


def write_comparison(report: dict, path: Path) -> None:
    path.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")


# oracle plumbing -----------------------------------------------------------------


def solve_instance(instance_path, out_dir: Path | None = None) -> dict:
    """Enumerate the optimum of a stored instance; optionally write the record."""
    inst = oracle.load_instance(instance_path)
    assignment, breakdown = oracle.enumerate_optimum(inst)
    record = oracle.assignment_record(assignment, breakdown)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        name = Path(instance_path).stem + "_solution.json"
        (out_dir / name).write_text(json.dumps(record, indent=1, sort_keys=True)
                                    + "\n")
        record["path"] = str(out_dir / name)
    return record
