"""Command line front end: run batches, dump schedules, inspect formations.

Exit codes: 0 success, 2 bad flags/config/schema, 3 output I/O failure.
All outputs are byte-stable for identical flags and seed; floats are
printed with 9 significant digits.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .controller import ControlGains
from .engine import EpisodeConfig, RunConfig, run_monte_carlo, sigma_profile
from .formation import (FORMATION_KINDS, FormationError, build_formation,
                        rigidity_rank, spec_from_json)
from .metrics import ecdf
from .scheduling import POLICIES, precompute_schedule

TIMESERIES_FORMAT = "timeseries.v1"
ECDF_FORMAT = "ecdf.v1"
SCHEDULE_FORMAT = "schedule.v1"

_RUN_KEYS = ("formation", "scheduler", "episodes", "seed", "duration", "ts",
             "dt", "kp", "kf", "ke", "sigma0", "d0", "workers", "burn_in",
             "out_dir")


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _merge_config(config_path: str | None, cli_values: dict) -> dict:
    """File values fill in wherever the flag was not given on the CLI."""
    merged = dict(cli_values)
    if config_path is not None:
        try:
            data = json.loads(Path(config_path).read_text())
        except OSError as exc:
            raise click.UsageError(f"cannot read config file: {exc}")
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"config file is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise click.UsageError("config file must hold a JSON object")
        for key, value in data.items():
            if key not in _RUN_KEYS:
                raise click.UsageError(f"config file: unknown key {key!r}")
            if merged.get(key) is None:
                merged[key] = value
    return merged


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        click.echo(f"error writing {path}: {exc}", err=True)
        sys.exit(3)


@click.group()
def main() -> None:
    """Formation tracking under scheduled localization."""


@main.command(name="run")
@click.option("--formation", type=click.Choice(FORMATION_KINDS), default=None)
@click.option("--scheduler", type=click.Choice(POLICIES + ("all",)), default=None,
              help="Scheduling policy, or 'all' for a paired comparison.")
@click.option("--episodes", type=int, default=None, help="Monte Carlo episodes.")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--duration", type=float, default=None, help="Episode length [s].")
@click.option("--ts", type=float, default=None, help="Scheduling slot [s].")
@click.option("--dt", type=float, default=None, help="Integration step [s].")
@click.option("--kp", type=float, default=None, help="Tracking gain.")
@click.option("--kf", type=float, default=None, help="Formation gain.")
@click.option("--ke", type=float, default=None, help="Estimator gain.")
@click.option("--sigma0", type=float, default=None, help="Noise scale [m/s].")
@click.option("--d0", type=float, default=None, help="Cube side [m].")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
@click.option("--workers", type=int, default=None, help="Episode workers.")
@click.option("--burn-in", type=float, default=None,
              help="Seconds dropped from each episode for the statistics.")
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file with defaults for any of the flags above.")
def cmd_run(config_path, **flags):
    """Run a Monte Carlo batch and write CSV/JSON result files."""
    v = _merge_config(config_path, flags)
    defaults = EpisodeConfig()
    scheduler = v["scheduler"] if v["scheduler"] is not None else "all"
    schedulers = POLICIES if scheduler == "all" else (scheduler,)
    try:
        episode = EpisodeConfig(
            formation=v["formation"] if v["formation"] is not None else defaults.formation,
            scheduler=schedulers[0],
            duration=v["duration"] if v["duration"] is not None else defaults.duration,
            ts=v["ts"] if v["ts"] is not None else defaults.ts,
            dt=v["dt"] if v["dt"] is not None else defaults.dt,
            gains=ControlGains(
                kp=v["kp"] if v["kp"] is not None else ControlGains.kp,
                kf=v["kf"] if v["kf"] is not None else ControlGains.kf,
                ke=v["ke"] if v["ke"] is not None else ControlGains.ke,
            ),
            sigma0=v["sigma0"] if v["sigma0"] is not None else defaults.sigma0,
            d0=v["d0"] if v["d0"] is not None else defaults.d0,
            master_seed=v["seed"] if v["seed"] is not None else defaults.master_seed,
        )
        run_cfg = RunConfig(
            episode=episode,
            schedulers=tuple(schedulers),
            n_episodes=v["episodes"] if v["episodes"] is not None else 100,
            workers=v["workers"] if v["workers"] is not None else 1,
            burn_in=v["burn_in"] if v["burn_in"] is not None else 1.0,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))

    summary = run_monte_carlo(run_cfg)
    out_dir = Path(v["out_dir"] if v["out_dir"] is not None else ".")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        click.echo(f"error creating {out_dir}: {exc}", err=True)
        sys.exit(3)

    seed = run_cfg.episode.master_seed
    lines = [f"# format={TIMESERIES_FORMAT} seed={seed} t=s loss=dimensionless",
             "scheduler,episode,t,loss_true,loss_estimated"]
    for name, res in summary.results.items():
        for e in range(res.loss_true.shape[0]):
            for k in range(res.t.size):
                lines.append(",".join((
                    name, str(e), _fmt(res.t[k]),
                    _fmt(res.loss_true[e, k]), _fmt(res.loss_estimated[e, k]))))
    _write_text(out_dir / "timeseries.csv", "\n".join(lines) + "\n")

    for name, res in summary.results.items():
        values, probs = ecdf(res.samples(), burn_in=run_cfg.burn_in)
        lines = [f"# format={ECDF_FORMAT} seed={seed} loss=dimensionless",
                 "value,cumulative_probability"]
        lines.extend(f"{_fmt(x)},{_fmt(p)}" for x, p in zip(values, probs))
        _write_text(out_dir / f"ecdf_{name}.csv", "\n".join(lines) + "\n")

    _write_text(out_dir / "summary.json",
                json.dumps(summary.summary_dict(), indent=2, sort_keys=True) + "\n")

    click.echo(f"master seed {run_cfg.episode.master_seed}, "
               f"{run_cfg.n_episodes} episodes, formation "
               f"{run_cfg.episode.formation}")
    click.echo("scheduler  p50            p90            p99            (true loss)")
    d = summary.summary_dict()["schedulers"]
    for name in summary.results:
        ps = d[name]["percentiles_true"]
        click.echo(f"{name:<9}  {_fmt(ps['50']):<13}  {_fmt(ps['90']):<13}  "
                   f"{_fmt(ps['99']):<13}")


@main.command(name="schedule")
@click.option("--scheduler", type=click.Choice(POLICIES), required=True)
@click.option("--formation", type=click.Choice(FORMATION_KINDS),
              default="symmetric", show_default=True)
@click.option("--slots", type=int, default=100, show_default=True)
@click.option("--ts", type=float, default=0.1, show_default=True)
@click.option("--sigma0", type=float, default=0.5, show_default=True)
@click.option("--d0", type=float, default=5.0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Output CSV path; stdout when omitted.")
def cmd_schedule(scheduler, formation, slots, ts, sigma0, d0, out_path):
    """Dump the precomputed localization schedule as CSV (slot, t, agent).

    Centralities are read with agents on their same-numbered slots.
    """
    if slots < 1:
        raise click.UsageError("--slots must be >= 1")
    if min(ts, sigma0, d0) <= 0:
        raise click.UsageError("--ts, --sigma0 and --d0 must be > 0")
    spec = build_formation(formation, d0)
    sigma = sigma_profile(EpisodeConfig(sigma0=sigma0), spec.n)
    seq = precompute_schedule(scheduler, sigma, spec.centralities, spec.d,
                              slots, ts)
    lines = [f"# format={SCHEDULE_FORMAT} t=s agent=1-based or 'all'",
             "slot,t,agent"]
    lines.extend(f"{k},{_fmt(k * ts)},{sel}" for k, sel in enumerate(seq, start=1))
    text = "\n".join(lines) + "\n"
    if out_path is None:
        click.echo(text, nl=False)
    else:
        _write_text(Path(out_path), text)


@main.command(name="inspect")
@click.option("--formation", type=click.Choice(FORMATION_KINDS), default=None)
@click.option("--spec-file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Custom formation JSON to validate and dump.")
@click.option("--d0", type=float, default=5.0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def cmd_inspect(formation, spec_file, d0, out_path):
    """Dump a formation (geometry, weights, rigidity rank) as JSON."""
    if (formation is None) == (spec_file is None):
        raise click.UsageError("give exactly one of --formation or --spec-file")
    try:
        if formation is not None:
            spec = build_formation(formation, d0)
        else:
            spec = spec_from_json(Path(spec_file).read_text())
    except FormationError as exc:
        raise click.UsageError(f"invalid formation: {exc}")
    except OSError as exc:
        click.echo(f"error reading {spec_file}: {exc}", err=True)
        sys.exit(3)
    data = spec.as_dict()
    data["rigidity_rank"] = rigidity_rank(spec)
    data["rigid"] = data["rigidity_rank"] == spec.n * spec.d - spec.d * (spec.d + 1) // 2
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if out_path is None:
        click.echo(text, nl=False)
    else:
        _write_text(Path(out_path), text)


if __name__ == "__main__":
    main()
