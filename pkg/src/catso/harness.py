"""Experiment runner: repeated seeded runs, aggregation, result files.

A run streams every event of a (shuffled, optionally drifted) dataset through
one policy and scores it by the total average reward ``100 * sum(r) / T``.
Run ``i`` (1-based) uses seed ``seed + i`` for everything it randomizes: the
known/unknown split, the event order, the drift and the policy's draws.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .arm_policies import RngStreams, build_policy
from .environments import (
    DatasetSpec,
    LabeledDataset,
    load_csv,
    make_nonstationary,
    next_session,
    round_half_up,
    split_known,
)
from .errors import ConfigError

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("dataset", "policy", "U", "S", "mean", "std", "runs", "seed", "v")


def fmt(x: float) -> str:
    return f"{x:.6g}"


def q6(x: float) -> float:
    """Round to the 6 significant digits used in every output file."""
    return float(fmt(x))


@dataclass
class ExperimentConfig:
    dataset: str = ""
    policy: str = "catso"
    label_column: str = "label"
    groups: str | None = None
    known_fraction: float = 0.10
    budget: str = "20%"
    stages: str = "1"
    v: float = 0.25
    nonstationary: bool = False
    window: int = 100
    runs: int = 10
    seed: int = 0
    max_events: int | None = None
    epoch: int = 100
    min_decay: float = 0.5
    out: str | None = None

    def validate(self) -> None:
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not 0.0 <= self.known_fraction < 1.0:
            raise ConfigError("known_fraction must lie in [0, 1)")
        if self.v < 0:
            raise ConfigError("v must be nonnegative")
        if self.window < 1 or self.epoch < 1:
            raise ConfigError("window and epoch must be positive")
        if self.max_events is not None and self.max_events < 1:
            raise ConfigError("max_events must be positive")
        if not 0.0 < self.min_decay <= 1.0:
            raise ConfigError("min_decay must lie in (0, 1]")


@dataclass
class RunSummary:
    config: ExperimentConfig
    dataset: str
    policy: str
    budget: int
    stages: int
    seeds: list[int]
    per_run: list[float]
    trajectory: np.ndarray = field(repr=False)
    wall_time: float = 0.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_run))

    @property
    def std(self) -> float:
        return float(np.std(self.per_run, ddof=1)) if len(self.per_run) > 1 else 0.0

    @property
    def runs(self) -> int:
        return len(self.per_run)

    def row(self) -> dict:
        return {
            "dataset": self.dataset,
            "policy": self.policy,
            "U": self.budget,
            "S": self.stages,
            "mean": fmt(self.mean),
            "std": fmt(self.std),
            "runs": self.runs,
            "seed": self.config.seed,
            "v": fmt(self.config.v),
        }

    def records(self) -> list[dict]:
        return [
            {
                "dataset": self.dataset,
                "policy": self.policy,
                "U": self.budget,
                "S": self.stages,
                "v": q6(self.config.v),
                "run": i + 1,
                "seed": seed,
                "events": int(self.trajectory.size),
                "total_average_reward": value,
            }
            for i, (seed, value) in enumerate(zip(self.seeds, self.per_run))
        ]

    @property
    def slug(self) -> str:
        return f"{self.dataset}_{self.policy}_U{self.budget}_S{self.stages}_v{fmt(self.config.v)}"


# -- config parsing --------------------------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key: str, value: str):
    kind = str(_FIELD_TYPES[key])
    value = value.strip()
    try:
        if "bool" in kind:
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if value.lower() in ("none", "") and "None" in kind:
            return None
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def parse_config_text(text: str) -> dict[str, list[str]]:
    """``key = value`` lines; comma-separated values define a sweep axis."""
    settings: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"config line {lineno}: unknown setting {key!r}")
        settings[key] = [v.strip() for v in value.split(",")]
    return settings


def expand_configs(settings: dict[str, list[str]]) -> list[ExperimentConfig]:
    """Cartesian product of all sweep axes, in a stable order."""
    keys = list(settings)
    configs = []
    for combo in itertools.product(*(settings[k] for k in keys)):
        kw = {k: _coerce(k, v) for k, v in zip(keys, combo)}
        cfg = ExperimentConfig(**kw)
        cfg.validate()
        configs.append(cfg)
    return configs


# -- budgets ------------------------------------------------------------------


def resolve_budget(spec, n_groups: int) -> int:
    """``"40%"`` or ``"0.4"`` is a fraction of the unknown groups; ``"3"`` a count."""
    s = str(spec).strip()
    try:
        if s.endswith("%"):
            count = round_half_up(float(s[:-1]) / 100.0 * n_groups)
        elif any(c in s for c in ".eE"):
            count = round_half_up(float(s) * n_groups)
        else:
            count = int(s)
    except ValueError:
        raise ConfigError(f"cannot parse budget {spec!r}") from None
    if not 0 <= count <= n_groups:
        raise ConfigError(f"budget {spec!r} resolves to {count}, outside [0, {n_groups}]")
    return count


def resolve_stages(spec, budget: int) -> int:
    s = str(spec).strip()
    if s.upper() == "U":
        return max(budget, 1)
    try:
        stages = int(s)
    except ValueError:
        raise ConfigError(f"cannot parse stages {spec!r}") from None
    if not 1 <= stages <= max(budget, 1):
        raise ConfigError(f"stages {stages} outside [1, max(U, 1)] with U={budget}")
    return stages


# -- running ------------------------------------------------------------------------


def load_dataset(config: ExperimentConfig) -> LabeledDataset:
    spec = DatasetSpec(groups_path=config.groups)
    return load_csv(config.dataset, config.label_column, spec)


def run_schema(dataset: LabeledDataset, config: ExperimentConfig, seed: int):
    if dataset.schema.observed:
        return dataset.schema
    return split_known(dataset, config.known_fraction, seed)


def plan(dataset: LabeledDataset, config: ExperimentConfig) -> tuple[int, int]:
    """(U, S) for this config, checked before any run starts."""
    n_groups = run_schema(dataset, config, config.seed + 1).n_groups
    name = config.policy.lower().replace("-", "_")
    if name == "cts_full":
        return n_groups, 1
    if name == "cts_query":
        return 0, 1
    budget = resolve_budget(config.budget, n_groups)
    stages = resolve_stages(config.stages, budget)
    if name in ("tsrc", "wtsrc"):
        stages = 1
    return budget, stages


PolicyFactory = Callable[..., object]


def run_once(
    config: ExperimentConfig,
    dataset: LabeledDataset,
    run_index: int,
    policy_factory: PolicyFactory | None = None,
) -> tuple[int, float, np.ndarray]:
    """One seeded run; returns (seed, total average reward, cumulative average curve)."""
    seed = config.seed + run_index + 1
    streams = RngStreams.from_seed(seed)
    schema = run_schema(dataset, config, seed)
    order = streams.env.permutation(dataset.n_events)
    if config.max_events is not None:
        order = order[: config.max_events]
    events = dataset.with_schema(schema).take(order)
    if config.nonstationary:
        events = make_nonstationary(events, seed)
    budget, stages = plan(dataset, config)
    factory = policy_factory or build_policy
    policy = factory(
        config.policy,
        schema,
        dataset.n_classes,
        budget=budget,
        stages=stages,
        v=config.v,
        nonstationary=config.nonstationary,
        window=config.window,
        epoch=config.epoch,
        min_decay=config.min_decay,
    )
    rewards = np.empty(events.n_events)
    for t in range(events.n_events):
        _, _, rewards[t] = policy.step(next_session(events, None, t, policy.budget), streams)
    curve = 100.0 * np.cumsum(rewards) / np.arange(1, rewards.size + 1)
    return seed, 100.0 * rewards.sum() / rewards.size, curve


def _run_task(args):
    config, dataset, run_index, factory = args
    start = time.perf_counter()
    result = run_once(config, dataset, run_index, factory)
    return result + (time.perf_counter() - start,)


def _policy_label(config: ExperimentConfig, factory) -> str:
    if factory is not None:
        return getattr(factory, "label", config.policy)
    from .arm_policies import ALIASES, DISPLAY_NAMES

    name = config.policy.lower().replace("-", "_")
    variant, ns = ALIASES.get(name, (name, config.nonstationary))
    if (variant, ns) not in DISPLAY_NAMES:
        raise ConfigError(f"unknown policy {config.policy!r}")
    return DISPLAY_NAMES[(variant, ns)]


def sweep(
    configs: Iterable[ExperimentConfig],
    out: str | Path | None = None,
    jobs: int = 1,
    datasets: dict[str, LabeledDataset] | None = None,
    policy_factory: PolicyFactory | None = None,
) -> list[RunSummary]:
    """Run every config; with ``out`` set, also write the result files there.

    Everything that can fail on bad input (paths, data files, budgets) is
    checked before the first run starts.
    """
    configs = list(configs)
    if out is not None:
        check_writable(out)
    datasets = dict(datasets or {})
    prepared, seen = [], set()
    for cfg in configs:
        cfg.validate()
        if cfg.dataset not in datasets:
            datasets[cfg.dataset] = load_dataset(cfg)
        ds = datasets[cfg.dataset]
        budget, stages = plan(ds, cfg)
        # baselines ignore the budget and stage axes; run each distinct cell once
        cell = (_policy_label(cfg, policy_factory), budget, stages)
        key = (cfg.dataset, cell, cfg.v, cfg.nonstationary, cfg.runs, cfg.seed, cfg.window,
               cfg.max_events, cfg.known_fraction, cfg.epoch, cfg.min_decay, cfg.groups, cfg.label_column)
        if key in seen:
            continue
        seen.add(key)
        if policy_factory is None:
            # builds once to surface config errors before any compute
            build_policy(cfg.policy, run_schema(ds, cfg, cfg.seed + 1), ds.n_classes, budget=budget, stages=stages)
        prepared.append((cfg, ds))

    tasks = [(cfg, ds, i, policy_factory) for cfg, ds in prepared for i in range(cfg.runs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]

    summaries, pos = [], 0
    for cfg, ds in prepared:
        chunk = results[pos : pos + cfg.runs]
        pos += cfg.runs
        budget, stages = plan(ds, cfg)
        summary = RunSummary(
            config=cfg,
            dataset=ds.name,
            policy=_policy_label(cfg, policy_factory),
            budget=budget,
            stages=stages,
            seeds=[r[0] for r in chunk],
            per_run=[q6(r[1]) for r in chunk],
            trajectory=np.mean([r[2] for r in chunk], axis=0),
            wall_time=sum(r[3] for r in chunk),
        )
        log.info("%s U=%d S=%d v=%s: %s +/- %s", summary.policy, budget, stages, fmt(cfg.v), fmt(summary.mean), fmt(summary.std))
        summaries.append(summary)
    if out is not None:
        emit(summaries, out)
    return summaries


def run_experiment(config: ExperimentConfig, dataset: LabeledDataset | None = None, **kw) -> RunSummary:
    datasets = {config.dataset: dataset} if dataset is not None else None
    return sweep([config], datasets=datasets, **kw)[0]


def best_by_v(summaries: Iterable[RunSummary]) -> list[RunSummary]:
    """Keep the best-v summary of every (dataset, policy, U, S) cell."""
    best: dict[tuple, RunSummary] = {}
    for s in summaries:
        key = (s.dataset, s.policy, s.budget, s.stages)
        if key not in best or s.mean > best[key].mean:
            best[key] = s
    return list(best.values())


# -- output -------------------------------------------------------------------------


def check_writable(out) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK | os.X_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def emit(summaries: list[RunSummary], out) -> dict[str, Path]:
    """Write ``summary.csv``, ``runs.jsonl`` and one trajectory CSV per summary."""
    out = check_writable(out)
    paths = {"summary": out / "summary.csv", "runs": out / "runs.jsonl"}
    with paths["summary"].open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for s in summaries:
            w.writerow(s.row())
    with paths["runs"].open("w") as fh:
        for s in summaries:
            for rec in s.records():
                fh.write(json.dumps(rec) + "\n")
    traj_dir = out / "trajectories"
    traj_dir.mkdir(exist_ok=True)
    for s in summaries:
        p = traj_dir / f"{s.slug}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["event", "cumulative_average_reward"])
            for t, value in enumerate(s.trajectory, 1):
                w.writerow([t, fmt(value)])
        paths[s.slug] = p
    return paths
