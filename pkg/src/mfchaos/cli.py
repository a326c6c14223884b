"""Command-line interface: simulation, checks, distances, experiments."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import bounds as bounds_mod
from .brownian import BrownianPath
from .config import ExperimentConfig, load_config
from .dynamics import simulate as run_simulate
from .harness import run_bound_suite, run_chaos, run_convergence, run_dichotomy, write_report
from .meanfield import picard_fixed_point
from .noise import noise_invariant_residuals
from .transport import EmpiricalMeasure, solve_transport
from .trajio import write_binary, write_csv


@click.group()
def main():
    """Particle systems in a shared environmental flow: simulate and verify."""


def _load(config_path: str, seed_noise: int | None, seed_initial: int | None) -> ExperimentConfig:
    cfg = load_config(config_path)
    if seed_noise is not None:
        cfg.seed_noise = seed_noise
        cfg.sim.seed_noise = seed_noise
    if seed_initial is not None:
        cfg.seed_initial_base = seed_initial
        cfg.sim.seed_initial = seed_initial
    return cfg


_common_opts = [
    click.option("--config", "config_path", required=True, type=click.Path(exists=True)),
    click.option("--seed-noise", type=int, default=None, help="override the noise seed"),
    click.option("--seed-initial", type=int, default=None, help="override the initial-data seed"),
    click.option("--out", "out_dir", type=click.Path(), default=None, help="output directory"),
]


def _with_common_opts(fn):
    for opt in reversed(_common_opts):
        fn = opt(fn)
    return fn


@main.command()
@_with_common_opts
@click.option("--format", "fmt", type=click.Choice(["csv", "binary"]), default="csv")
def simulate(config_path, seed_noise, seed_initial, out_dir, fmt):
    """Run one simulation from the config's sim block and dump the trajectory."""
    cfg = _load(config_path, seed_noise, seed_initial)
    sim = cfg.sim
    noise = cfg.noise.build() if sim.noise_mode == "common" else None
    kernel = sim.build_kernel()
    path = sim.build_path(noise)
    initial = cfg.initial.sample(sim.N, sim.d, sim.seed_initial)
    traj = run_simulate(
        initial, kernel, noise, path, sim.noise_mode,
        snapshot_stride=sim.snapshot_stride, env_flow=sim.build_env_flow(),
        blowup_bound=sim.blowup_bound,
    )
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dest = out / ("trajectory.csv" if fmt == "csv" else "trajectory.bin")
    (write_csv if fmt == "csv" else write_binary)(traj, dest)
    click.echo(f"wrote {dest} ({traj.num_snapshots} snapshots, N={sim.N}, d={sim.d})")


@main.command("noise-check")
@_with_common_opts
@click.option("--points", type=int, default=100, show_default=True)
def noise_check(config_path, seed_noise, seed_initial, out_dir, points):
    """Print the noise-compliance residuals as JSON."""
    cfg = _load(config_path, seed_noise, seed_initial)
    model = cfg.noise.build()
    res = noise_invariant_residuals(model, num_points=points, seed=cfg.seed_noise)
    res["num_modes"] = model.num_modes
    res["dim"] = model.dim
    click.echo(json.dumps(res, indent=2, sort_keys=True))


def _read_cloud(path: str) -> EmpiricalMeasure:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return EmpiricalMeasure(data)


@main.command()
@click.argument("cloud_a", type=click.Path(exists=True))
@click.argument("cloud_b", type=click.Path(exists=True))
@click.option("--entropic", "epsilon", type=float, default=None,
              help="entropic regularization strength (approximate solve)")
@click.option("--exact-limit", type=int, default=4096, show_default=True)
def w1(cloud_a, cloud_b, epsilon, exact_limit):
    """First-order transport distance between two point-cloud CSVs."""
    res = solve_transport(
        _read_cloud(cloud_a), _read_cloud(cloud_b), p=1,
        exact_limit=exact_limit, epsilon=epsilon,
    )
    click.echo(f"{res.value:.12g}")


@main.command()
@click.argument("cloud_a", type=click.Path(exists=True))
@click.argument("cloud_b", type=click.Path(exists=True))
@click.option("--entropic", "epsilon", type=float, default=None)
@click.option("--exact-limit", type=int, default=4096, show_default=True)
def w2(cloud_a, cloud_b, epsilon, exact_limit):
    """Second-order transport distance between two point-cloud CSVs."""
    res = solve_transport(
        _read_cloud(cloud_a), _read_cloud(cloud_b), p=2,
        exact_limit=exact_limit, epsilon=epsilon,
    )
    click.echo(f"{res.value:.12g}")


@main.command()
@click.option("--lk", type=float, required=True, help="kernel Lipschitz constant")
@click.option("--lsigma", type=float, required=True, help="field Lipschitz constant")
@click.option("--lb", type=float, default=None, help="drift Lipschitz constant (default: lk)")
@click.option("--horizon", "-T", "horizon", type=float, default=1.0, show_default=True)
@click.option("--p", type=float, default=1.0, show_default=True)
@click.option("--c1", type=float, default=bounds_mod.DEFAULT_C1, show_default=True)
@click.option("--c2", type=float, default=bounds_mod.DEFAULT_C2, show_default=True)
def bounds(lk, lsigma, lb, horizon, p, c1, c2):
    """Print the full stability-constants table as JSON."""
    consts = bounds_mod.compute_constants(
        L_K=lk, L_sigma=lsigma, L_b=lb, T=horizon, p=p, C_1=c1, C_2=c2
    )
    click.echo(json.dumps(consts.as_dict(), indent=2, sort_keys=True))


@main.command()
@_with_common_opts
@click.option("--ref-points", "-M", type=int, default=1024, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True)
def meanfield(config_path, seed_noise, seed_initial, out_dir, ref_points, tol):
    """Construct the limit measure path by the fixed-point iteration."""
    cfg = _load(config_path, seed_noise, seed_initial)
    noise = cfg.noise.build()
    kernel = cfg.sim.build_kernel()
    path = BrownianPath.for_common_noise(
        cfg.seed_noise, cfg.sim.dt, cfg.sim.num_steps, noise.num_modes
    )
    cloud = cfg.initial.sample(ref_points, cfg.sim.d, cfg.seed_initial_base)
    mp, state = picard_fixed_point(
        cloud, kernel, noise, path, tol=tol, exact_limit=cfg.exact_limit
    )
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "meanfield_path.csv").open("w") as fh:
        fh.write("t,point,x\n" if cfg.sim.d == 1 else
                 "t,point," + ",".join(f"x{c}" for c in range(cfg.sim.d)) + "\n")
        for t, mu in zip(mp.times, mp.measures):
            for i, row in enumerate(mu.points):
                fh.write(f"{t!r},{i}," + ",".join(repr(float(v)) for v in row) + "\n")
    log = {
        "iterations": state.iteration,
        "final_gap": state.successive_gap,
        "gap_history": state.gap_history,
        "t_star": state.t_star,
        "gamma_star": state.gamma_star,
        "subinterval_steps": state.subinterval_steps,
    }
    (out / "meanfield_log.json").write_text(json.dumps(log, indent=2) + "\n")
    click.echo(f"converged in {state.iteration} sweeps (last gap {state.successive_gap:.3e})")


def _experiment(runner, config_path, seed_noise, seed_initial, out_dir, **kwargs):
    cfg = _load(config_path, seed_noise, seed_initial)
    report = runner(cfg, **kwargs)
    dest = write_report(report, out_dir or cfg.out_dir)
    for c in report.criteria:
        status = "PASS" if c["passed"] else "FAIL"
        click.echo(f"[{status}] {c['name']}: lhs={c['lhs']:.6g} rhs={c['rhs']:.6g}")
    click.echo(f"report: {dest}")
    if not report.all_passed():
        sys.exit(1)


@main.command()
@_with_common_opts
def converge(config_path, seed_noise, seed_initial, out_dir):
    """Convergence of the N-particle empirical measure to the limit."""
    _experiment(run_convergence, config_path, seed_noise, seed_initial, out_dir)


@main.command()
@_with_common_opts
@click.option("--phi1", default="tanh_x1", show_default=True)
@click.option("--phi2", default="gauss_bump", show_default=True)
def chaos(config_path, seed_noise, seed_initial, out_dir, phi1, phi2):
    """Conditional factorization of tagged particles given the noise."""
    _experiment(run_chaos, config_path, seed_noise, seed_initial, out_dir,
                phi1_name=phi1, phi2_name=phi2)


@main.command()
@_with_common_opts
@click.option("--phi", default="tanh_x1", show_default=True)
def dichotomy(config_path, seed_noise, seed_initial, out_dir, phi):
    """Shared-noise vs independent-noise variance of an observable."""
    _experiment(run_dichotomy, config_path, seed_noise, seed_initial, out_dir, phi_name=phi)


@main.command("bound-suite")
@_with_common_opts
@click.option("--cloud-size", "-M", type=int, default=256, show_default=True)
@click.option("--num-seeds", type=int, default=12, show_default=True)
def bound_suite(config_path, seed_noise, seed_initial, out_dir, cloud_size, num_seeds):
    """Quantitative stability inequalities at desk scale."""
    _experiment(run_bound_suite, config_path, seed_noise, seed_initial, out_dir,
                M=cloud_size, num_seeds=num_seeds)


if __name__ == "__main__":
    main()
