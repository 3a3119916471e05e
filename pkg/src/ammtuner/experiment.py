"""Scenario orchestration: training loops, sweeps, metrics, persistence.

Runs are deterministic: the environment draws of epoch `e` under seed `s`
come from a generator seeded with (s, e), so every agent trained with seed
`s` faces the same generated population and order queue each epoch, and the
agent's own exploration draws come from a separate stream.  Cross-agent
comparisons therefore share environment randomness seed for seed.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from ammtuner.agent import (
    ACTION_SETS,
    BASELINE_PARAMS,
    AgentKind,
    Hyperparams,
    QTable,
    apply_action,
    epsilon_at,
    select_action,
    td_update,
)
from ammtuner.env import EnvConfig, SwapMarketEnv
from ammtuner.errors import ConfigError
from ammtuner.market import (
    LOOSE_TOLERANCE,
    NORMAL_TOLERANCE,
    SwapStatus,
    ToleranceSpec,
)

# Epoch generators derive from (seed, epoch); the agent's exploration stream
# gets its own salt so it never perturbs environment draws.
AGENT_STREAM_SALT = 7_919

# eta * epochs at the full 3000-epoch scale (eta 0.0015); shorter profiles
# keep the same decay shape so epsilon still lands near eps_min by the end.
ETA_EPOCHS = 4.5

SCENARIOS = ("normal", "loose", "high-liquidity", "behavior-change")


def default_eta(epochs: int) -> float:
    return ETA_EPOCHS / epochs


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    agent_kind: AgentKind
    env: EnvConfig
    epochs: int = 500
    seeds: tuple[int, ...] = (1, 2, 3)
    update_interval: int = 1
    hyper: Hyperparams = Hyperparams()
    switch_to: ToleranceSpec | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.update_interval < 1:
            raise ConfigError("update_interval must be at least 1")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")

    def to_dict(self) -> dict:
        out = {
            "scenario": self.scenario,
            "agent": self.agent_kind.value,
            "epochs": self.epochs,
            "seeds": list(self.seeds),
            "update_interval": self.update_interval,
            "hyperparams": {f.name: getattr(self.hyper, f.name)
                            for f in fields(self.hyper)},
            "env": self.env.to_dict(),
        }
        if self.switch_to is not None:
            out["switch_to"] = {"mu": self.switch_to.mu,
                                "sigma": self.switch_to.sigma,
                                "lower": self.switch_to.lower,
                                "upper": self.switch_to.upper}
        return out


def scenario_env(name: str) -> EnvConfig:
    """Environment presets for the named scenarios."""
    if name in ("normal", "behavior-change"):
        return EnvConfig()
    if name == "loose":
        return EnvConfig(tolerance=LOOSE_TOLERANCE)
    if name == "high-liquidity":
        return EnvConfig(user_balance=18_000.0, amount_min=1_000.0,
                         amount_max=18_000.0)
    raise ConfigError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")


def make_config(scenario: str, agent: AgentKind, epochs: int = 500,
                seeds=(1, 2, 3), update_interval: int = 1,
                hyper_overrides: dict | None = None,
                env_overrides: dict | None = None,
                switch_to: ToleranceSpec | None = None) -> ExperimentConfig:
    """Resolve a runnable config from scenario name plus overrides.

    Unless overridden, eta follows the epoch count (see ETA_EPOCHS) so the
    exploration schedule finishes decaying within the run.
    """
    if epochs < 1:
        raise ConfigError("epochs must be at least 1")
    overrides = dict(hyper_overrides or {})
    overrides.setdefault("eta", default_eta(epochs))
    try:
        hyper = Hyperparams(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad hyperparams: {exc}") from None
    env = scenario_env(scenario)
    if env_overrides:
        merged = env.to_dict()
        merged.update(env_overrides)
        env = EnvConfig.from_dict(merged)
    if scenario == "behavior-change" and switch_to is None:
        raise ConfigError("behavior-change scenario requires switch_to")
    return ExperimentConfig(scenario=scenario, agent_kind=agent, env=env,
                            epochs=epochs, seeds=tuple(seeds),
                            update_interval=update_interval, hyper=hyper,
                            switch_to=switch_to)


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    total_reward: float
    fees_collected: float
    success_count: int
    held_count: int
    canceled_count: int
    mean_fee_level: float
    mean_leverage: float
    epsilon: float
    action_stddev: float


@dataclass
class RunResult:
    config: ExperimentConfig
    seed: int
    metrics: list[EpochMetrics]
    qtable: QTable
    duration: float


def run_training(config: ExperimentConfig, seed: int,
                 on_epoch=None) -> RunResult:
    """Train (or statically run) one agent for the configured epochs.

    Every update_interval-th step the agent picks an action epsilon-greedily,
    applies it, then the environment advances update_interval steps; the
    summed reward feeds a single TD update toward the post-block observation.
    The baseline takes no actions and never updates.
    """
    kind = config.agent_kind
    effects = ACTION_SETS[kind]
    learning = kind is not AgentKind.BASELINE
    qtable = QTable(len(effects))
    agent_rng = np.random.default_rng([AGENT_STREAM_SALT, seed])
    env = SwapMarketEnv(config.env)
    switch_epoch = config.epochs // 2
    metrics: list[EpochMetrics] = []
    started = time.perf_counter()

    for epoch in range(config.epochs):
        tolerance = None
        if config.switch_to is not None and epoch >= switch_epoch:
            tolerance = config.switch_to
        env_rng = np.random.default_rng([seed, epoch])
        if learning:
            obs = env.reset(env_rng, tolerance=tolerance)
            eps = epsilon_at(epoch, config.hyper)
        else:
            obs = env.reset(env_rng, params=BASELINE_PARAMS,
                            tolerance=tolerance)
            eps = 0.0

        actions: list[int] = []
        total_reward = 0.0
        fees = 0.0
        n_success = n_held = n_canceled = 0
        fee_level_sum = 0.0
        leverage_sum = 0.0
        steps = 0

        while not env.done:
            action = select_action(qtable, obs, eps, kind, agent_rng)
            actions.append(action)
            env.set_params(apply_action(env.params, effects[action]))
            fee_level = env.params.fee_level
            leverage = env.params.leverage_coeff
            block_reward = 0.0
            next_obs = obs
            for _ in range(config.update_interval):
                next_obs, reward, info = env.step()
                block_reward += reward
                steps += 1
                fee_level_sum += fee_level
                leverage_sum += leverage
                if info.status is SwapStatus.SUCCESS:
                    n_success += 1
                    fees += info.fee
                elif info.status is SwapStatus.HOLDING:
                    n_held += 1
                elif info.status is SwapStatus.CANCELED:
                    n_canceled += 1
                if info.done:
                    break
            if learning:
                td_update(qtable, obs, action, block_reward, next_obs,
                          config.hyper)
            total_reward += block_reward
            obs = next_obs

        stddev = float(np.std(np.asarray(actions, dtype=float)))
        metrics.append(EpochMetrics(
            epoch=epoch,
            total_reward=total_reward,
            fees_collected=fees,
            success_count=n_success,
            held_count=n_held,
            canceled_count=n_canceled,
            mean_fee_level=fee_level_sum / steps,
            mean_leverage=leverage_sum / steps,
            epsilon=eps,
            action_stddev=stddev,
        ))
        if on_epoch is not None:
            on_epoch(env, epoch, metrics[-1])

    return RunResult(config=config, seed=seed, metrics=metrics, qtable=qtable,
                     duration=time.perf_counter() - started)


def run_behavior_change(config: ExperimentConfig, seed: int) -> RunResult:
    """Training run whose tolerance mode switches at the halfway epoch."""
    if config.switch_to is None:
        raise ConfigError("behavior-change run requires switch_to")
    return run_training(config, seed)


def run_seeds(config: ExperimentConfig, jobs: int = 1) -> list[RunResult]:
    """One run per configured seed, optionally fanned out over threads."""
    if jobs <= 1 or len(config.seeds) == 1:
        return [run_training(config, seed) for seed in config.seeds]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_training, config, seed)
                   for seed in config.seeds]
        return [f.result() for f in futures]


def terminal_reward(result: RunResult, fraction: float = 0.1) -> float:
    """Mean total reward over the final fraction of epochs (at least one)."""
    tail = max(1, int(len(result.metrics) * fraction))
    return float(np.mean([m.total_reward for m in result.metrics[-tail:]]))


def mean_terminal_reward(results) -> float:
    return float(np.mean([terminal_reward(r) for r in results]))


def moving_average(series, window: int) -> list[float]:
    """Trailing mean over up to `window` points; output matches input length."""
    if window < 1:
        raise ValueError("window must be at least 1")
    out = []
    acc = 0.0
    for i, value in enumerate(series):
        acc += value
        if i >= window:
            acc -= series[i - window]
        out.append(acc / min(i + 1, window))
    return out


METRICS_FIELDS = [f.name for f in fields(EpochMetrics)]
_INT_FIELDS = {"epoch", "success_count", "held_count", "canceled_count"}


def write_metrics_csv(result: RunResult, path) -> None:
    """One row per epoch, full float precision (repr round-trip)."""
    path = Path(path)
    try:
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(METRICS_FIELDS)
            for m in result.metrics:
                writer.writerow([repr(getattr(m, name))
                                 if name not in _INT_FIELDS
                                 else getattr(m, name)
                                 for name in METRICS_FIELDS])
    except OSError as exc:
        raise ConfigError(f"cannot write metrics to {path}: {exc}") from exc


def read_metrics_csv(path) -> list[EpochMetrics]:
    path = Path(path)
    try:
        with path.open(newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader)
            if header != METRICS_FIELDS:
                raise ConfigError(f"unexpected metrics header in {path}")
            out = []
            for row in reader:
                kwargs = {}
                for name, cell in zip(METRICS_FIELDS, row):
                    kwargs[name] = int(cell) if name in _INT_FIELDS else float(cell)
                out.append(EpochMetrics(**kwargs))
            return out
    except OSError as exc:
        raise ConfigError(f"cannot read metrics from {path}: {exc}") from exc


def run_dir_name(agent: AgentKind, seed: int) -> str:
    return f"{agent.value}-seed{seed}"


def write_manifest(out_dir, config: ExperimentConfig, extra: dict | None = None) -> None:
    payload = {"package": "ammtuner", "config": config.to_dict()}
    if extra:
        payload.update(extra)
    (Path(out_dir) / "manifest.json").write_text(
        json.dumps(payload, indent=1, sort_keys=True) + "\n")


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.is_file():
        raise ConfigError(f"no manifest.json under {run_dir}")
    return json.loads(path.read_text())


# ---------------------------------------------------------------------------
# Sweeps

SWEEP_PARAMS = ("swap-size", "tolerance", "update-interval")


@dataclass(frozen=True)
class SweepRow:
    value: float
    agent: AgentKind
    terminal_reward: float


@dataclass
class SweepResult:
    param: str
    rows: list[SweepRow]

    def by_agent(self, agent: AgentKind) -> list[SweepRow]:
        return [r for r in self.rows if r.agent is agent]


def sweep_config(base: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    """Derive the per-point config for one sweep value."""
    if param == "swap-size":
        # fixed-amount orders against deep user balances isolate trade size;
        # loose tolerances keep the largest sizes from canceling wholesale
        env = replace(base.env, user_balance=18_000.0, amount_min=value,
                      amount_max=value, tolerance=LOOSE_TOLERANCE)
        return replace(base, scenario="swap-size", env=env)
    if param == "tolerance":
        env = replace(base.env,
                      tolerance=ToleranceSpec(mu=value, sigma=value,
                                              lower=NORMAL_TOLERANCE.lower,
                                              upper=NORMAL_TOLERANCE.upper))
        return replace(base, scenario="tolerance", env=env)
    if param == "update-interval":
        return replace(base, update_interval=int(value))
    raise ConfigError(f"unknown sweep param {param!r}; "
                      f"expected one of {SWEEP_PARAMS}")


def sweep(base: ExperimentConfig, param: str, values, agents,
          jobs: int = 1) -> SweepResult:
    """One full training run per (value, agent, seed); each row reports the
    mean terminal reward across seeds."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    rows = []
    for value in sorted(values):
        point = sweep_config(base, param, value)
        for agent in agents:
            cfg = replace(point, agent_kind=agent)
            results = run_seeds(cfg, jobs=jobs)
            rows.append(SweepRow(value=float(value), agent=agent,
                                 terminal_reward=mean_terminal_reward(results)))
    return SweepResult(param=param, rows=rows)


def write_sweep_csv(result: SweepResult, path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["param", "value", "agent", "terminal_reward"])
        for row in result.rows:
            writer.writerow([result.param, repr(row.value), row.agent.value,
                             repr(row.terminal_reward)])


# ---------------------------------------------------------------------------
# Cross-run comparison

@dataclass(frozen=True)
class RunSummary:
    label: str
    agent: str
    scenario: str
    terminal_mean: float


def summarize_run_dir(run_dir) -> RunSummary:
    """Mean terminal reward across the per-seed metrics of one output dir."""
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    config = manifest["config"]
    terminals = []
    tail_fraction = 0.1
    for seed in config["seeds"]:
        metrics_path = (run_dir / run_dir_name(AgentKind.parse(config["agent"]),
                                               seed) / "metrics.csv")
        metrics = read_metrics_csv(metrics_path)
        tail = max(1, int(len(metrics) * tail_fraction))
        terminals.append(float(np.mean([m.total_reward for m in metrics[-tail:]])))
    return RunSummary(label=run_dir.name, agent=config["agent"],
                      scenario=config["scenario"],
                      terminal_mean=float(np.mean(terminals)))


def compare_runs(run_dirs) -> tuple[list[RunSummary], list[tuple]]:
    """Summaries plus pairwise terminal-reward ratios for >= 2 run dirs.

    All runs must share scenario, epochs, seeds, and environment config.
    """
    if len(run_dirs) < 2:
        raise ConfigError("compare needs at least two run directories")
    manifests = [read_manifest(d) for d in run_dirs]
    reference = manifests[0]["config"]
    for d, manifest in zip(run_dirs[1:], manifests[1:]):
        config = manifest["config"]
        for key in ("scenario", "epochs", "seeds", "env", "update_interval"):
            if config.get(key) != reference.get(key):
                raise ConfigError(
                    f"run {d} is not comparable to {run_dirs[0]}: "
                    f"{key} differs ({config.get(key)!r} vs {reference.get(key)!r})")
    summaries = [summarize_run_dir(d) for d in run_dirs]
    ratios = []
    for a in summaries:
        for b in summaries:
            if a is b:
                continue
            ratio = (a.terminal_mean / b.terminal_mean
                     if b.terminal_mean != 0 else math.inf)
            ratios.append((a.label, b.label, a.terminal_mean, b.terminal_mean,
                           ratio))
    return summaries, ratios


def write_compare_csv(summaries, ratios, path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["run", "agent", "scenario", "terminal_mean"])
        for s in summaries:
            writer.writerow([s.label, s.agent, s.scenario, repr(s.terminal_mean)])
        writer.writerow(["run_a", "run_b", "mean_a", "mean_b", "ratio"])
        for a, b, mean_a, mean_b, ratio in ratios:
            writer.writerow([a, b, repr(mean_a), repr(mean_b), repr(ratio)])
