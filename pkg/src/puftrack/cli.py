"""Command-line experiment runner.

Exit codes: 0 all expectations met, 2 expectation failure, 3 config error.
"""
from __future__ import annotations

import json
import pathlib
import sys

import click

from . import experiments
from .contract import ConfigError
from .scenario import ScenarioError, export_scenario_ledger, load_scenario, run_scenario

EXIT_OK = 0
EXIT_EXPECTATION = 2
EXIT_CONFIG = 3


@click.group()
def main():
    """Supply-chain tracking simulator: tuning, prototype, and attack runs."""


def _out_dir(out: str | None) -> pathlib.Path:
    path = pathlib.Path(out) if out else pathlib.Path(".")
    path.mkdir(parents=True, exist_ok=True)
    return path


@main.command()
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(), help="Output directory.")
@click.option("--format", "fmt", default="csv", show_default=True,
              type=click.Choice(["csv", "json"]))
@click.option("--devices", default=17, show_default=True, type=int)
@click.option("--tuning-devices", default=3, show_default=True, type=int)
@click.option("--challenges", default=10, show_default=True, type=int)
@click.option("--r-min", default=5, show_default=True, type=int)
@click.option("--r-max", default=9, show_default=True, type=int)
@click.option("--repetitions", default=15, show_default=True, type=int)
@click.option("--pair-pool", default=21000, show_default=True, type=int)
@click.option("--width", default=4, show_default=True, type=int)
@click.option("--noise", default=0.002, show_default=True, type=float)
def tune(seed, out, fmt, devices, tuning_devices, challenges, r_min, r_max,
         repetitions, pair_pool, width, noise):
    """Threshold tuning sweep: TAR/FAR/TRR/FRR per tuning device and R."""
    try:
        report = experiments.run_tuning(
            device_count=devices,
            tuning_count=tuning_devices,
            challenges=challenges,
            r_range=(r_min, r_max),
            repetitions=repetitions,
            pair_pool=pair_pool,
            width=width,
            noise_rate=noise,
            seed=seed,
        )
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    payload = report.to_csv() if fmt == "csv" else report.to_json()
    target = _out_dir(out) / f"tuning.{fmt}"
    target.write_text(payload)
    click.echo(payload, nl=False)
    click.echo(f"wrote {target}", err=True)
    ok = (
        all(r.tar == 1.0 and r.frr == 0.0 for r in report.rows)
        and all(r.far == 0.0 and r.trr == 1.0 for r in report.rows if r.threshold == r_max)
        and experiments.far_is_monotone(report)
    )
    sys.exit(EXIT_OK if ok else EXIT_EXPECTATION)


@main.command()
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path())
@click.option("--format", "fmt", default="json", show_default=True,
              type=click.Choice(["csv", "json"]))
@click.option("--width", default=4, show_default=True, type=int)
def prototype(seed, out, fmt, width):
    """Three-organisation prototype: honest run plus device substitution."""
    report = experiments.run_prototype(seed=seed, width=width)
    payload = json.dumps(report, sort_keys=True, indent=2) + "\n"
    target = _out_dir(out) / "prototype.json"
    target.write_text(payload)
    click.echo(payload, nl=False)
    ok = (
        report["honest"]["succeeded"] == report["honest"]["verifications"]
        and report["adversary"]["failed_at_distribution"] == report["adversary"]["substituted"]
    )
    sys.exit(EXIT_OK if ok else EXIT_EXPECTATION)


@main.command()
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path())
@click.option("--runs", default=100, show_default=True, type=int,
              help="Seeds per attack.")
@click.option("--byzantine-schedules", default=100, show_default=True, type=int)
def attacks(seed, out, runs, byzantine_schedules):
    """Run the full attack matrix and check every expected outcome."""
    matrix = experiments.run_attack_matrix(
        seeds=runs, byzantine_schedules=byzantine_schedules, base_seed=seed
    )
    payload = json.dumps(matrix, sort_keys=True, indent=2) + "\n"
    target = _out_dir(out) / "attacks.json"
    target.write_text(payload)
    click.echo(payload, nl=False)
    sys.exit(EXIT_OK if matrix["all_expectations_met"] else EXIT_EXPECTATION)


@main.command("export-ledger")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Scenario file to run.")
@click.option("--seed", default=None, type=int, help="Override the scenario seed.")
@click.option("--out", default=None, type=click.Path())
def export_ledger(config_path, seed, out):
    """Run an honest scenario and export its committed ledger as JSON lines."""
    try:
        spec = load_scenario(config_path)
        lines = export_scenario_ledger(spec, seed=seed)
    except (ScenarioError, ConfigError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    payload = "\n".join(lines) + ("\n" if lines else "")
    target = _out_dir(out) / "ledger.jsonl"
    target.write_text(payload)
    click.echo(payload, nl=False)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=None, type=int)
@click.option("--out", default=None, type=click.Path())
def run(config_path, seed, out):
    """Run one scenario file (honest or attack) and report outcomes."""
    try:
        spec = load_scenario(config_path)
        report = run_scenario(spec, seed=seed)
    except (ScenarioError, ConfigError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    payload = json.dumps(report, sort_keys=True, indent=2) + "\n"
    target = _out_dir(out) / f"{spec.name}.json"
    target.write_text(payload)
    click.echo(payload, nl=False)
    result = report.get("result", {})
    failed = result.get("expectation_met") is False or result.get("safe") is False
    sys.exit(EXIT_EXPECTATION if failed else EXIT_OK)


if __name__ == "__main__":
    main()
