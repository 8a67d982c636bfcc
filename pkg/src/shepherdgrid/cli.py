"""Command-line driver: config loading, experiment selection, output management.

Subcommands: trial, batch, sweep-loss, sweep-targets, coverage, timeline.
Precedence is flags > config file > defaults. Every run echoes the fully
resolved configuration to effective_config.json in the output directory.
Exit codes: 0 success, 2 configuration error, 3 aborted trial.
"""
from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .coverage import CoverageParams, containment_condition, slot_coverage_sweep, write_sweep_csv
from .engine import Scenario, TrialAbortedError, run_trial
from .harness import (BatchConfig, DEFAULT_LOSS_LEVELS, DEFAULT_TARGET_LEVELS,
                      batch_stats, phase_duration_stats, phase_timeline_export,
                      run_batch, sweep_packet_loss, sweep_target_count,
                      write_curve, write_summary, write_sweep, write_timeline,
                      write_tti, _fmt, _r9)
from .pack_coordination import StrategyParams

EXIT_CONFIG_ERROR = 2
EXIT_TRIAL_ABORTED = 3

_SCENARIO_KEYS = ("n_targets", "n_packs", "strategy", "loss_prob", "comms_enabled",
                  "leader_observes_target", "arena", "max_duration",
                  "capture_radius", "dt", "seed", "striker_accel_authority",
                  "escape_mc_samples")
_PARAM_KEYS = tuple(f.name for f in dataclasses.fields(StrategyParams))
_BATCH_KEYS = ("n_trials", "seed_base")
_COVERAGE_KEYS = ("r_formation", "r_intercept", "v_target_max", "mc_samples",
                  "mc_seed", "dts")
_SWEEP_KEYS = ("loss_levels", "target_levels")

_SECTIONS = {"scenario": _SCENARIO_KEYS, "params": _PARAM_KEYS,
             "batch": _BATCH_KEYS, "coverage": _COVERAGE_KEYS,
             "sweep": _SWEEP_KEYS}


class ConfigError(ValueError):
    """Bad configuration: unknown key, type mismatch, or invariant violation."""


def _default_tree() -> dict:
    return {
        "scenario": {k: getattr(Scenario(), k) for k in _SCENARIO_KEYS},
        "params": {k: getattr(StrategyParams(), k) for k in _PARAM_KEYS},
        "batch": {"n_trials": 100, "seed_base": 1},
        "coverage": {"r_formation": 40.0, "r_intercept": 25.0,
                     "v_target_max": 35.0, "mc_samples": 10000, "mc_seed": 0,
                     "dts": [round(0.1 * i, 10) for i in range(1, 21)]},
        "sweep": {"loss_levels": list(DEFAULT_LOSS_LEVELS),
                  "target_levels": list(DEFAULT_TARGET_LEVELS)},
    }


def parse_config(path: str | None, overrides: dict | None = None) -> dict:
    """Resolve defaults, an optional JSON file, and flag overrides into one tree.

    Unknown sections or keys are rejected with the offending path named.
    Overrides use dotted paths ("scenario.seed"). The resulting values are
    validated by constructing the underlying types before anything runs.
    """
    tree = _default_tree()
    if path is not None:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config root must be an object")
        for section, values in loaded.items():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section: {section}")
            if not isinstance(values, dict):
                raise ConfigError(f"section {section} must be an object")
            for key, value in values.items():
                if key not in _SECTIONS[section]:
                    raise ConfigError(f"unknown config key: {section}.{key}")
                tree[section][key] = value
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, key = dotted.split(".", 1)
        tree[section][key] = value
    _validate(tree)
    return tree


def _validate(tree: dict) -> None:
    build_scenario(tree)  # raises on bad scenario or strategy parameters
    try:
        BatchConfig(build_scenario(tree), **tree["batch"])
        cov = dict(tree["coverage"])
        dts = cov.pop("dts")
        r_formation = cov.pop("r_formation")
        if r_formation <= 0:
            raise ValueError("coverage.r_formation must be positive")
        if not dts or any(d <= 0 for d in dts):
            raise ValueError("coverage.dts must be positive")
        CoverageParams(horizon_dt=dts[0], **cov)
        sw = tree["sweep"]
        if any(not 0.0 <= p <= 1.0 for p in sw["loss_levels"]):
            raise ValueError("sweep.loss_levels must be in [0, 1]")
        if any(int(n) < 1 for n in sw["target_levels"]):
            raise ValueError("sweep.target_levels must be positive integers")
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def build_scenario(tree: dict) -> Scenario:
    try:
        params = StrategyParams(**tree["params"])
        sc = dict(tree["scenario"])
        sc["arena"] = tuple(float(v) for v in sc["arena"])
        if len(sc["arena"]) != 3:
            raise ValueError("scenario.arena must have three extents")
        return Scenario(params=params, **sc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _prepare_out(out: str, force: bool) -> Path:
    path = Path(out)
    if path.exists():
        if not path.is_dir():
            raise ConfigError(f"output path is not a directory: {out}")
        if any(path.iterdir()) and not force:
            raise ConfigError(
                f"output directory {out} is not empty; pass --force to reuse it")
    else:
        path.mkdir(parents=True)
    return path


def _echo_config(tree: dict, out: Path) -> None:
    doc = {s: {k: _r9(v) if isinstance(v, float) else v
               for k, v in tree[s].items()} for s in sorted(tree)}
    with open(out / "effective_config.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _overrides(seed=None, trials=None, strategy=None, loss=None, targets=None):
    ov = {"scenario.seed": seed, "batch.n_trials": trials,
          "scenario.strategy": strategy, "scenario.loss_prob": loss}
    if targets is not None:
        ov["scenario.n_targets"] = targets
        ov["scenario.n_packs"] = targets
    return ov


_shared = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="JSON config file; flags override its values."),
    click.option("--out", required=True, help="Output directory."),
    click.option("--force", is_flag=True, help="Allow a non-empty output directory."),
]


def _with_shared(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Pursuit-evasion simulation experiments: pack strategy vs baseline."""


def _run(fn):
    """Execute a subcommand body, mapping failures to stable exit codes."""
    try:
        fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    except TrialAbortedError as exc:
        click.echo(f"trial aborted: {exc}", err=True)
        sys.exit(EXIT_TRIAL_ABORTED)


@main.command()
@_with_shared
@click.option("--seed", type=int, default=None, help="Trial seed.")
@click.option("--strategy", type=click.Choice(["shepherd", "traditional"]), default=None)
@click.option("--loss", type=float, default=None, help="Packet-loss probability.")
@click.option("--targets", type=int, default=None, help="Targets (packs scale 1:1).")
@click.option("--trace", is_flag=True, help="Emit a JSONL trajectory trace.")
def trial(config_path, out, force, seed, strategy, loss, targets, trace):
    """Run one seeded trial and write its outcome and event log."""
    def body():
        tree = parse_config(config_path, _overrides(seed=seed, strategy=strategy,
                                                    loss=loss, targets=targets))
        out_dir = _prepare_out(out, force)
        _echo_config(tree, out_dir)
        sc = dataclasses.replace(build_scenario(tree), record_trace=trace)
        result = run_trial(sc)
        doc = {
            "seed": result.seed,
            "duration": _r9(result.duration),
            "outcomes": [{
                "outcome": "Captured" if o.captured else "Escaped(timeout)",
                "capture_time": _r9(o.capture_time),
                "capturing_member": o.capturing_member,
                "capture_phase": o.capture_phase,
            } for o in result.outcomes],
            "energy": [_r9(e) for e in result.energy],
            "events": [{"time": _r9(ev.time), "pack": ev.pack,
                        "from": ev.from_phase.value, "to": ev.to_phase.value}
                       for ev in result.events],
            "vel_violations": result.vel_violations,
            "accel_violations": result.accel_violations,
        }
        with open(out_dir / "trial.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if trace:
            with open(out_dir / "trace.jsonl", "w") as fh:
                for t, agent, role, phase, pos, vel, amag in result.trace:
                    fh.write(json.dumps({
                        "t": _r9(t), "agent": agent, "role": role, "phase": phase,
                        "pos": [_r9(c) for c in pos], "vel": [_r9(c) for c in vel],
                        "accel_mag": _r9(amag)}) + "\n")
        captured = sum(o.captured for o in result.outcomes)
        click.echo(f"trial seed={sc.seed}: {captured}/{len(result.outcomes)} captured")
    _run(body)


@main.command()
@_with_shared
@click.option("--seed", type=int, default=None, help="Base seed (trials use seed, seed+1, ...).")
@click.option("--trials", type=int, default=None, help="Number of trials.")
@click.option("--strategy", type=click.Choice(["shepherd", "traditional"]), default=None)
@click.option("--loss", type=float, default=None, help="Packet-loss probability.")
@click.option("--targets", type=int, default=None, help="Targets (packs scale 1:1).")
@click.option("--plots", is_flag=True, help="Render figures next to the data files.")
def batch(config_path, out, force, seed, trials, strategy, loss, targets, plots):
    """Run a Monte Carlo batch and write summary, curve, TTI and timeline files."""
    def body():
        tree = parse_config(config_path, _overrides(seed=seed, trials=trials,
                                                    strategy=strategy, loss=loss,
                                                    targets=targets))
        if seed is not None:
            tree["batch"]["seed_base"] = seed
        out_dir = _prepare_out(out, force)
        _echo_config(tree, out_dir)
        sc = build_scenario(tree)
        cfg = BatchConfig(sc, **tree["batch"])
        results = run_batch(cfg)
        stats = batch_stats(results, sc.max_duration)
        write_summary(stats, out_dir / "summary.json",
                      extra={"strategy": sc.strategy, "loss_prob": _r9(sc.loss_prob),
                             "n_targets": sc.n_targets, "seed_base": cfg.seed_base})
        write_curve(stats, out_dir / "curve.csv")
        write_tti(stats, out_dir / "tti.csv")
        timeline_rows = phase_timeline_export(results)
        write_timeline(timeline_rows, out_dir / "timeline.csv")
        if plots:
            from . import report
            report.render_batch(out_dir)
        click.echo(f"batch: success={stats.success_rate:.4f} "
                   f"[{stats.ci_lo:.4f}, {stats.ci_hi:.4f}] over {stats.n_trials} trials")
    _run(body)


@main.command("sweep-loss")
@_with_shared
@click.option("--seed", type=int, default=None, help="Base seed per batch.")
@click.option("--trials", type=int, default=None, help="Trials per (strategy, level).")
@click.option("--plots", is_flag=True, help="Render figures next to the data files.")
def sweep_loss(config_path, out, force, seed, trials, plots):
    """Sweep packet-loss levels for both strategies and write sweep.csv."""
    def body():
        tree = parse_config(config_path, _overrides(seed=seed, trials=trials))
        if seed is not None:
            tree["batch"]["seed_base"] = seed
        out_dir = _prepare_out(out, force)
        _echo_config(tree, out_dir)
        sc = build_scenario(tree)
        rows = sweep_packet_loss(sc, tree["batch"]["n_trials"],
                                 tree["batch"]["seed_base"],
                                 tuple(tree["sweep"]["loss_levels"]))
        write_sweep(rows, out_dir / "sweep.csv")
        if plots:
            from . import report
            report.render_sweep(out_dir, xlabel="packet-loss probability")
        click.echo(f"sweep-loss: {len(rows)} rows written")
    _run(body)


@main.command("sweep-targets")
@_with_shared
@click.option("--seed", type=int, default=None, help="Base seed per batch.")
@click.option("--trials", type=int, default=None, help="Trials per (strategy, level).")
@click.option("--plots", is_flag=True, help="Render figures next to the data files.")
def sweep_targets(config_path, out, force, seed, trials, plots):
    """Sweep target counts (packs scale 1:1) and write sweep.csv."""
    def body():
        tree = parse_config(config_path, _overrides(seed=seed, trials=trials))
        if seed is not None:
            tree["batch"]["seed_base"] = seed
        out_dir = _prepare_out(out, force)
        _echo_config(tree, out_dir)
        sc = build_scenario(tree)
        rows = sweep_target_count(sc, tree["batch"]["n_trials"],
                                  tree["batch"]["seed_base"],
                                  tuple(int(n) for n in tree["sweep"]["target_levels"]))
        write_sweep(rows, out_dir / "sweep.csv")
        if plots:
            from . import report
            report.render_sweep(out_dir, xlabel="simultaneous targets")
        click.echo(f"sweep-targets: {len(rows)} rows written")
    _run(body)


@main.command()
@_with_shared
@click.option("--plots", is_flag=True, help="Render figures next to the data files.")
def coverage(config_path, out, force, plots):
    """Escape-bound and containment-condition sweep over horizon values."""
    def body():
        tree = parse_config(config_path, None)
        out_dir = _prepare_out(out, force)
        _echo_config(tree, out_dir)
        cov = tree["coverage"]
        rows = slot_coverage_sweep(cov["dts"], cov["r_formation"],
                                   cov["r_intercept"], cov["v_target_max"],
                                   cov["mc_samples"], cov["mc_seed"])
        write_sweep_csv(rows, out_dir / "coverage.csv")
        if plots:
            from . import report
            report.render_coverage(out_dir)
        holds = containment_condition(cov["r_formation"], cov["r_intercept"],
                                      cov["v_target_max"], 0.1)
        click.echo(f"coverage: containment at dt=0.1 {'holds' if holds else 'fails'}; "
                   f"{len(rows)} rows written")
    _run(body)


@main.command()
@click.option("--from", "from_dir", required=True, type=click.Path(exists=True),
              help="Prior batch output directory (reads its effective_config.json).")
@click.option("--out", required=True, help="Output directory.")
@click.option("--force", is_flag=True, help="Allow a non-empty output directory.")
@click.option("--plots", is_flag=True, help="Render figures next to the data files.")
def timeline(from_dir, out, force, plots):
    """Re-export phase timelines and duration statistics from a prior batch.

    The prior batch is reproduced deterministically from its echoed config.
    """
    def body():
        cfg_path = Path(from_dir) / "effective_config.json"
        if not cfg_path.exists():
            raise ConfigError(f"{from_dir} has no effective_config.json")
        tree = parse_config(str(cfg_path), None)
        out_dir = _prepare_out(out, force)
        _echo_config(tree, out_dir)
        sc = build_scenario(tree)
        results = run_batch(BatchConfig(sc, **tree["batch"]))
        rows = phase_timeline_export(results)
        write_timeline(rows, out_dir / "timeline.csv")
        durations = phase_duration_stats(rows)
        with open(out_dir / "phase_durations.json", "w") as fh:
            json.dump({p: {k: _r9(v) for k, v in d.items()}
                       for p, d in durations.items()}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if plots:
            from . import report
            report.render_timeline(out_dir)
        click.echo(f"timeline: {len(rows)} intervals; phases: {', '.join(durations)}")
    _run(body)


if __name__ == "__main__":
    main()
