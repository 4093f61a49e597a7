"""Command line interface: simulation, CLT verification, condition checks, fitting."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from .asymptotics import (check_linear_clt_conditions,
                          check_path_variance_clt_conditions,
                          check_second_moment_clt_conditions, clt_prediction)
from .crm import choose_jump_floor, sample_crm
from .experiments import (ExperimentConfig, run_consistency_demo,
                          run_posterior_clt, run_prior_clt, write_result)
from .hazard import HazardRealization
from .posterior import (gibbs_diagnostics, initialize_posterior,
                        mean_hazard_profile, run_gibbs)


def _load_config(config_path, seed, out_dir, replicates, horizons):
    config = ExperimentConfig.from_file(config_path)
    if seed is not None:
        config.master_seed = seed
    if out_dir is not None:
        config.out_dir = out_dir
    if replicates is not None:
        config.replicates = replicates
    if horizons:
        config.horizons = tuple(float(h) for h in horizons)
    return config


def _common_options(fn):
    fn = click.option("--seed", type=int, default=None,
                      help="Override the master seed.")(fn)
    fn = click.option("--out-dir", type=click.Path(), default=None,
                      help="Output directory for result.json and CSV files.")(fn)
    fn = click.option("--replicates", type=int, default=None,
                      help="Override the replicate count.")(fn)
    fn = click.option("--horizons", multiple=True, type=float,
                      help="Override the horizon list (repeatable).")(fn)
    return fn


def _finish(result, config, default_dir):
    out_dir = config.out_dir or default_dir
    path = write_result(result, out_dir)
    click.echo(f"wrote {path}")
    click.echo("PASS" if result.all_passed() else "FAIL")


@click.group()
def main():
    """Hazard-rate mixtures over completely random measures: simulate and verify."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@_common_options
def simulate(config_path, seed, out_dir, replicates, horizons):
    """Simulate prior hazard paths; emit per-replicate functionals and one dump."""
    config = _load_config(config_path, seed, out_dir, replicates, horizons)
    kernel = config.kernel()
    intensity = config.intensity()
    window = config.window(kernel, max(config.horizons))
    floor = choose_jump_floor(intensity, config.truncation_budget)
    out = Path(config.out_dir or "simulate-out")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for h_idx, T in enumerate(config.horizons):
        for r in range(config.replicates):
            rng = config.replicate_rng(h_idx, r)
            crm = sample_crm(intensity, window, rng, jump_floor=floor,
                             truncation_budget=config.truncation_budget)
            real = HazardRealization(kernel, crm)
            f = real.path_functionals(T)
            rows.append([T, r, f.cumulative, f.path_second_moment, f.path_variance,
                         crm.expected_dropped_mass])
            if r == 0:
                dump = real.to_dict(seed=[config.master_seed, h_idx, r])
                (out / f"realization_T{T:g}.json").write_text(
                    json.dumps(dump, sort_keys=True))
    with open(out / "samples.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["horizon", "replicate", "cumulative_hazard",
                         "path_second_moment", "path_variance",
                         "expected_dropped_mass"])
        writer.writerows(rows)
    click.echo(f"wrote {out / 'samples.csv'}")


@main.command("prior-clt")
@click.argument("config_path", type=click.Path(exists=True))
@_common_options
def prior_clt(config_path, seed, out_dir, replicates, horizons):
    """Verify prior-path limit laws by Monte Carlo."""
    config = _load_config(config_path, seed, out_dir, replicates, horizons)
    result = run_prior_clt(config)
    _finish(result, config, "prior-clt-out")


@main.command("posterior-clt")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--ratio-horizon", type=float, default=None,
              help="Also report the posterior/prior mean cumulative-hazard ratio.")
@_common_options
def posterior_clt(config_path, ratio_horizon, seed, out_dir, replicates, horizons):
    """Verify that posterior functionals obey the unchanged prior limit law."""
    config = _load_config(config_path, seed, out_dir, replicates, horizons)
    result = run_posterior_clt(config, ratio_horizon=ratio_horizon)
    _finish(result, config, "posterior-clt-out")


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@_common_options
def conditions(config_path, seed, out_dir, replicates, horizons):
    """Numerically evaluate the limit-theorem hypotheses on a horizon grid."""
    config = _load_config(config_path, seed, out_dir, replicates, horizons)
    kernel = config.kernel()
    intensity = config.intensity()
    grid = list(config.horizons)
    report = {"kernel": kernel.kind, "horizons": grid, "checks": []}
    targets = {}
    linear_pred = clt_prediction(kernel, intensity, "linear")
    targets_linear = {"sigma0_sq": linear_pred.limit_variance,
                      "provenance": linear_pred.provenance}
    for check in check_linear_clt_conditions(kernel, intensity, grid,
                                             targets=targets_linear):
        report["checks"].append(check.to_dict())
    quad_pred = clt_prediction(kernel, intensity, "path_second_moment")
    if quad_pred.applicable:
        targets = {**quad_pred.aux, "provenance": quad_pred.provenance}
    for check in check_second_moment_clt_conditions(kernel, intensity, grid,
                                                    targets=targets):
        report["checks"].append(check.to_dict())
    for check in check_path_variance_clt_conditions(kernel, intensity, grid,
                                                    targets=targets):
        report["checks"].append(check.to_dict())
    out = Path(config.out_dir or "conditions-out")
    out.mkdir(parents=True, exist_ok=True)
    (out / "conditions.json").write_text(json.dumps(report, indent=2, sort_keys=True,
                                                    default=str))
    click.echo(f"wrote {out / 'conditions.json'}")
    for check in report["checks"]:
        status = check["passed"]
        click.echo(f"{check['label']}: fitted={check['fitted_limit']:.6g} "
                   f"target={check['target']} passed={status}")


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@_common_options
def consistency(config_path, seed, out_dir, replicates, horizons):
    """Empirical posterior-concentration demo against a true hazard."""
    config = _load_config(config_path, seed, out_dir, replicates, horizons)
    result = run_consistency_demo(config)
    _finish(result, config, "consistency-out")


@main.command("posterior-fit")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--grid", nargs=3, type=float, default=(0.05, 5.0, 100),
              help="t_min t_max n_points for the hazard curve grid.")
@_common_options
def posterior_fit(config_path, grid, seed, out_dir, replicates, horizons):
    """Gibbs fit on a dataset; emit posterior mean hazard curves with bands."""
    config = _load_config(config_path, seed, out_dir, replicates, horizons)
    kernel = config.kernel()
    intensity = config.intensity()
    observations = config.observations()
    if not observations:
        raise click.UsageError("posterior-fit needs a posterior data block")
    pc = config.posterior
    rng = config.stream_rng(0x61BB5)
    state = initialize_posterior(observations, kernel, intensity, rng)
    snapshots, trace = run_gibbs(state, rng, pc.burn_in, pc.thin, pc.keep,
                                 pc.refresh_locations)
    t_lo, t_hi, t_n = grid
    ts = np.linspace(t_lo, t_hi, int(t_n))
    profile = mean_hazard_profile(state, t_hi * 1.02)
    base_curve = np.asarray(profile(ts), dtype=float)
    per_state = []
    for snap in snapshots:
        locs = np.asarray(snap.locations)
        sizes = np.asarray(snap.sizes, dtype=float)
        curve = base_curve.copy()
        if locs.size:
            mean_jumps = (sizes - intensity.sigma) / (
                intensity.gamma + state.tilt_rate(locs))
            curve = curve + np.sum(mean_jumps[None, :]
                                   * kernel.eval(ts[:, None], locs[None, :]), axis=1)
        per_state.append(curve)
    per_state = np.asarray(per_state)
    mean_curve = per_state.mean(axis=0)
    q05 = np.quantile(per_state, 0.05, axis=0)
    q95 = np.quantile(per_state, 0.95, axis=0)
    out = Path(config.out_dir or "posterior-fit-out")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "curves.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "posterior_mean_hazard", "q05", "q95"])
        for row in zip(ts, mean_curve, q05, q95):
            writer.writerow([float(v) for v in row])
    diag = gibbs_diagnostics(trace)
    (out / "fit.json").write_text(json.dumps(
        {"diagnostics": diag, "retained_states": len(snapshots),
         "checkpoint": state.to_checkpoint(rng)}, indent=2, sort_keys=True,
        default=str))
    click.echo(f"wrote {out / 'curves.csv'}")


if __name__ == "__main__":
    main()
