"""Command-line entry point: training, baseline, sweeps, comparison.

Values resolve flag > config file > default.  Exit codes: 0 success,
1 configuration/usage problem (diagnostic names the offending key),
2 runtime failure.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from ammtuner import kernels
from ammtuner.agent import AgentKind, save_qtable
from ammtuner.errors import AmmTunerError, ConfigError
from ammtuner.experiment import (
    SWEEP_PARAMS,
    ExperimentConfig,
    compare_runs,
    make_config,
    run_dir_name,
    run_seeds,
    sweep,
    terminal_reward,
    write_compare_csv,
    write_manifest,
    write_metrics_csv,
    write_sweep_csv,
)
from ammtuner.market import tolerance_mode

OUT_ROOT_ENV = "AMMTUNER_OUT_ROOT"

AGENT_CHOICES = [k.value for k in AgentKind]
SCENARIO_CHOICES = ["normal", "loose", "high-liquidity"]
HYPER_KEYS = ("alpha", "gamma", "eps_max", "eps_min", "eta")


def _load_config_file(path):
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    return raw


def _resolve(flag_value, file_config, key, default=None):
    if flag_value is not None:
        return flag_value
    if key in file_config:
        return file_config[key]
    return default


def _resolve_out(out, file_config, subcommand):
    out = _resolve(out, file_config, "out")
    if out is None:
        root = os.environ.get(OUT_ROOT_ENV)
        if root is None:
            raise ConfigError(
                "out: no output directory given (use --out, the config "
                f"file, or {OUT_ROOT_ENV})")
        out = str(Path(root) / subcommand)
    return Path(out)


def _parse_seeds(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(s) for s in text)
    try:
        return tuple(int(part) for part in str(text).split(",") if part != "")
    except ValueError:
        raise ConfigError(f"seeds: cannot parse {text!r} as a comma list "
                          "of integers") from None


def _parse_values(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(part) for part in str(text).split(",") if part != ""]
    except ValueError:
        raise ConfigError(f"values: cannot parse {text!r} as a comma list "
                          "of numbers") from None


def _hyper_overrides(file_config, **flags):
    overrides = dict(file_config.get("hyperparams", {}))
    for key, value in flags.items():
        if value is not None:
            overrides[key] = value
    unknown = set(overrides) - set(HYPER_KEYS)
    if unknown:
        raise ConfigError(f"hyperparams: unknown key(s) {sorted(unknown)}")
    return overrides


def _build_run_config(file_config, *, agent, scenario, epochs, seeds,
                      update_interval, switch_to=None,
                      **hyper_flags) -> ExperimentConfig:
    agent = _resolve(agent, file_config, "agent")
    if agent is None:
        raise ConfigError("agent: no agent kind given")
    try:
        kind = AgentKind.parse(agent)
    except ValueError as exc:
        raise ConfigError(f"agent: {exc}") from None
    scenario = _resolve(scenario, file_config, "scenario", "normal")
    epochs = int(_resolve(epochs, file_config, "epochs", 500))
    seeds = _parse_seeds(_resolve(seeds, file_config, "seeds", "1,2,3"))
    update_interval = int(_resolve(update_interval, file_config,
                                   "update_interval", 1))
    return make_config(
        scenario=scenario, agent=kind, epochs=epochs, seeds=seeds,
        update_interval=update_interval,
        hyper_overrides=_hyper_overrides(file_config, **hyper_flags),
        env_overrides=file_config.get("env"),
        switch_to=switch_to)


def _execute_runs(config: ExperimentConfig, out_dir: Path, jobs: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(out_dir, config, extra={"kernel_backend": kernels.BACKEND})
    results = run_seeds(config, jobs=jobs)
    for result in results:
        sub = out_dir / run_dir_name(config.agent_kind, result.seed)
        sub.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(result, sub / "metrics.csv")
        save_qtable(result.qtable, config.agent_kind, config.hyper,
                    sub / "qtable.json")
        click.echo(f"{config.agent_kind.value} seed={result.seed} "
                   f"terminal_reward={terminal_reward(result):.3f} "
                   f"({result.duration:.1f}s)")
    mean = sum(terminal_reward(r) for r in results) / len(results)
    click.echo(f"{config.agent_kind.value} mean terminal_reward={mean:.3f} "
               f"-> {out_dir}")


def _run_options(require_agent):
    def wrap(fn):
        opts = [
            click.option("--config", "config_path",
                         type=click.Path(dir_okay=False), default=None,
                         help="JSON config file; flags override it."),
            click.option("--scenario",
                         type=click.Choice(SCENARIO_CHOICES), default=None),
            click.option("--epochs", type=int, default=None),
            click.option("--seeds", default=None,
                         help="Comma-separated seed list, e.g. 1,2,3."),
            click.option("--update-interval", "-k", type=int, default=None,
                         help="Environment steps between agent decisions."),
            click.option("--out", type=click.Path(file_okay=False),
                         default=None, help="Output directory."),
            click.option("--jobs", type=int, default=1,
                         help="Worker threads for per-seed runs."),
            click.option("--alpha", type=float, default=None),
            click.option("--gamma", type=float, default=None),
            click.option("--eps-max", type=float, default=None),
            click.option("--eps-min", type=float, default=None),
            click.option("--eta", type=float, default=None),
        ]
        if require_agent:
            opts.insert(1, click.option(
                "--agent", type=click.Choice(AGENT_CHOICES), default=None))
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return wrap


@click.group()
def cli():
    """Hybrid-AMM market simulator with Q-learning fee/leverage tuning."""


@cli.command()
@_run_options(require_agent=True)
def train(config_path, agent, scenario, epochs, seeds, update_interval, out,
          jobs, alpha, gamma, eps_max, eps_min, eta):
    """Train one agent; writes metrics CSV and Q-table snapshot per seed."""
    file_config = _load_config_file(config_path)
    config = _build_run_config(
        file_config, agent=agent, scenario=scenario, epochs=epochs,
        seeds=seeds, update_interval=update_interval,
        alpha=alpha, gamma=gamma, eps_max=eps_max, eps_min=eps_min, eta=eta)
    _execute_runs(config, _resolve_out(out, file_config, "train"), jobs)


@cli.command()
@_run_options(require_agent=False)
def baseline(config_path, scenario, epochs, seeds, update_interval, out,
             jobs, alpha, gamma, eps_max, eps_min, eta):
    """Run the static protocol (fee 0.17%, leverage 42); no learning."""
    file_config = _load_config_file(config_path)
    file_config["agent"] = "baseline"
    config = _build_run_config(
        file_config, agent=None, scenario=scenario, epochs=epochs,
        seeds=seeds, update_interval=update_interval,
        alpha=alpha, gamma=gamma, eps_max=eps_max, eps_min=eps_min, eta=eta)
    _execute_runs(config, _resolve_out(out, file_config, "baseline"), jobs)


@cli.command("behavior-change")
@click.option("--from-mode", type=click.Choice(["normal", "loose"]),
              default=None, help="Tolerance mode for the first half.")
@click.option("--to-mode", type=click.Choice(["normal", "loose"]),
              default=None, help="Tolerance mode after the halfway epoch.")
@_run_options(require_agent=True)
def behavior_change(from_mode, to_mode, config_path, agent, scenario, epochs,
                    seeds, update_interval, out, jobs, alpha, gamma, eps_max,
                    eps_min, eta):
    """Train across a user-behavior switch at the halfway epoch."""
    file_config = _load_config_file(config_path)
    from_mode = _resolve(from_mode, file_config, "from_mode")
    to_mode = _resolve(to_mode, file_config, "to_mode")
    if from_mode is None or to_mode is None:
        raise ConfigError("from_mode/to_mode: both tolerance modes are "
                          "required for behavior-change")
    if scenario is not None:
        raise ConfigError("scenario: behavior-change sets its own scenario")
    file_config["scenario"] = "behavior-change"
    file_config.setdefault("env", {})["tolerance"] = from_mode
    config = _build_run_config(
        file_config, agent=agent, scenario=None, epochs=epochs, seeds=seeds,
        update_interval=update_interval, switch_to=tolerance_mode(to_mode),
        alpha=alpha, gamma=gamma, eps_max=eps_max, eps_min=eps_min, eta=eta)
    _execute_runs(config, _resolve_out(out, file_config, "behavior-change"),
                  jobs)


@cli.command("sweep")
@click.option("--param", type=click.Choice(list(SWEEP_PARAMS)), default=None)
@click.option("--values", default=None,
              help="Comma-separated sweep values, e.g. 1,5,10,25,50.")
@click.option("--agents", default=None,
              help="Comma-separated agent kinds (default: all four).")
@_run_options(require_agent=False)
def sweep_cmd(param, values, agents, config_path, scenario, epochs, seeds,
              update_interval, out, jobs, alpha, gamma, eps_max, eps_min, eta):
    """Sweep one knob; writes a summary table CSV."""
    file_config = _load_config_file(config_path)
    param = _resolve(param, file_config, "param")
    if param is None:
        raise ConfigError("param: sweep parameter is required")
    values = _parse_values(_resolve(values, file_config, "values", []))
    if not values:
        raise ConfigError("values: sweep needs at least one value")
    agent_names = _resolve(agents, file_config, "agents",
                           "fee,leverage,combined,baseline")
    if isinstance(agent_names, str):
        agent_names = [a for a in agent_names.split(",") if a]
    try:
        agent_kinds = [AgentKind.parse(a) for a in agent_names]
    except ValueError as exc:
        raise ConfigError(f"agents: {exc}") from None
    file_config["agent"] = agent_kinds[0].value
    base = _build_run_config(
        file_config, agent=None, scenario=scenario, epochs=epochs,
        seeds=seeds, update_interval=update_interval,
        alpha=alpha, gamma=gamma, eps_max=eps_max, eps_min=eps_min, eta=eta)
    out_dir = _resolve_out(out, file_config, "sweep")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(out_dir, base,
                   extra={"sweep": {"param": param, "values": values,
                                    "agents": [k.value for k in agent_kinds]},
                          "kernel_backend": kernels.BACKEND})
    result = sweep(base, param, values, agent_kinds, jobs=jobs)
    write_sweep_csv(result, out_dir / "sweep.csv")
    for row in result.rows:
        click.echo(f"{param}={row.value:g} {row.agent.value}: "
                   f"terminal_reward={row.terminal_reward:.3f}")
    click.echo(f"sweep table -> {out_dir / 'sweep.csv'}")


@cli.command()
@click.argument("run_dirs", nargs=-1,
                type=click.Path(exists=True, file_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Comparison CSV path (default compare.csv).")
def compare(run_dirs, out):
    """Tabulate terminal rewards and ratios across finished runs."""
    summaries, ratios = compare_runs(list(run_dirs))
    width = max(len(s.label) for s in summaries)
    for s in summaries:
        click.echo(f"{s.label:<{width}}  agent={s.agent:<9} "
                   f"terminal_mean={s.terminal_mean:.3f}")
    for a, b, _, _, ratio in ratios:
        click.echo(f"{a} / {b} = {ratio:.4f}")
    if out is None:
        root = os.environ.get(OUT_ROOT_ENV)
        out = Path(root) / "compare.csv" if root else Path("compare.csv")
    write_compare_csv(summaries, ratios, out)
    click.echo(f"comparison table -> {out}")


def main(argv=None) -> int:
    """Run the CLI programmatically; returns the exit code."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.exceptions.Abort:
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 1
    except AmmTunerError as exc:
        click.echo(f"run failed: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"run failed: {exc}", err=True)
        return 2
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
