#!/usr/bin/env python3
"""
hetfront CLI - front dynamics in heterogeneous FitzHugh-Nagumo media
"""

import json
import logging
import sys
from pathlib import Path

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from hetfront.background import Sign, riccati_slopes, stationary_front_positions
from hetfront.config import Config
from hetfront.constant_coeff import bifurcation_point, speed_roots
from hetfront.errors import HetfrontError
from hetfront.experiments import compare_trajectories, dde_background, run_example, time_align
from hetfront.heterogeneity import EXAMPLE_IDS, ZERO, eval_heterogeneity
from hetfront.history import FrontHistory
from hetfront.implicit_dde import dde_run_algo2, initial_vfield
from hetfront.dde import dde_run_algo1
from hetfront.model import ModelParams
from hetfront.output import ensure_dir, read_trajectory, write_background, write_diagnostics, write_field, \
    write_profile, write_trajectory
from hetfront.pde import make_ic_relax_shift, run_pde
from hetfront.wave_ode import find_speed

console = Console()


def _setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _fail(exc: Exception):
    console.print(f"[red]✗ {exc}[/red]")
    sys.exit(1)


def _model(ctx, alpha, gamma, tauhat) -> ModelParams:
    """Model from the loaded config file, else from the flags."""
    if ctx.obj['config_file'] is not None:
        return ctx.obj['config'].model
    config = ctx.obj['config']
    return ModelParams(
        alpha=config.model.alpha if alpha is None else alpha,
        gamma=config.model.gamma if gamma is None else gamma,
        tauhat=config.model.tauhat if tauhat is None else tauhat,
    )


def _print_json(data):
    console.print_json(json.dumps(data))


@click.group()
@click.option('--config', '-c', 'config_file', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='JSON config file; its values take precedence over flags')
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
@click.pass_context
def cli(ctx, config_file, verbose):
    """🌊 hetfront - Fronts in Heterogeneous FitzHugh-Nagumo Media"""
    _setup_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj['config_file'] = config_file
    try:
        ctx.obj['config'] = Config.load(config_file) if config_file else Config.default()
    except HetfrontError as exc:
        _fail(exc)


@cli.command()
@click.option('--example', '-e', type=click.Choice(EXAMPLE_IDS), help='Use a named example setup')
@click.option('--out', '-o', type=click.Path(path_type=Path), default=Path('background.csv'), show_default=True)
@click.pass_context
def background(ctx, example, out):
    """Background state v_b^- and q_b^- for f1 = 0 (CSV: x, f2, vbm_plus_1, qbm)."""
    config = Config.for_example(example) if example and ctx.obj['config_file'] is None else ctx.obj['config']
    try:
        bg = dde_background(config)
        minus = bg.as_sign(Sign.MINUS)
        x = minus.v.x
        path = write_background(out, x, eval_heterogeneity(config.f2, x), minus.v.values, minus.q.values)
    except HetfrontError as exc:
        _fail(exc)
    console.print(f"[green]✓[/green] Background on {x.size} nodes written to {path}")


@cli.command('stationary-fronts')
@click.option('--example', '-e', type=click.Choice(EXAMPLE_IDS), help='Use a named example setup')
@click.pass_context
def stationary_fronts(ctx, example):
    """Stationary front positions (JSON)."""
    config = Config.for_example(example) if example and ctx.obj['config_file'] is None else ctx.obj['config']
    try:
        bg = dde_background(config)
        fronts = stationary_front_positions(config.model, bg, riccati_slopes(ZERO, bg.v.x))
    except HetfrontError as exc:
        _fail(exc)
    _print_json(fronts.to_dict())


@cli.command()
@click.option('--alpha', type=float)
@click.option('--gamma', type=float)
@click.option('--tauhat', type=float)
@click.pass_context
def speeds(ctx, alpha, gamma, tauhat):
    """Singular-limit front speeds (JSON)."""
    try:
        roots = speed_roots(_model(ctx, alpha, gamma, tauhat))
    except HetfrontError as exc:
        _fail(exc)
    _print_json(roots.to_dict())


@cli.command()
@click.option('--gamma', type=float)
@click.option('--tauhat', type=float)
@click.pass_context
def bifurcation(ctx, gamma, tauhat):
    """Fold point (c_bp, alpha_bp) of the speed equation (JSON)."""
    try:
        p = _model(ctx, None, gamma, tauhat)
        point = bifurcation_point(p.gamma, p.tauhat)
    except HetfrontError as exc:
        _fail(exc)
    _print_json(point.to_dict())


@cli.command()
@click.option('--eps', type=float, required=True)
@click.option('--alpha', type=float)
@click.option('--gamma', type=float)
@click.option('--tauhat', type=float)
@click.option('--root', type=click.Choice(['m', '0', 'p']), default='0', show_default=True)
@click.pass_context
def shoot(ctx, eps, alpha, gamma, tauhat, root):
    """Travelling-wave speed bracket at finite eps by shooting (JSON)."""
    p = _model(ctx, alpha, gamma, tauhat)
    try:
        singular = speed_roots(p).pick(root)
        lo, hi = find_speed(eps, p, root)
    except HetfrontError as exc:
        _fail(exc)
    _print_json({"eps": eps, "root": root, "singular": singular, "bracket": [lo, hi], "speed": 0.5 * (lo + hi)})


@cli.command('pde-run')
@click.option('--eps', type=float, help='Defaults to the first entry of eps_list')
@click.option('--z0', type=float, default=0.0, show_default=True, help='Initial front position')
@click.option('--T', 'T', type=float, help='Run length')
@click.option('--out', '-o', type=click.Path(path_type=Path), help='Output directory')
@click.pass_context
def pde_run(ctx, eps, z0, T, out):
    """Run the full PDE from a relaxed front at z0."""
    config = ctx.obj['config']
    eps = config.eps_list[0] if eps is None else eps
    out = ensure_dir(out or config.output_dir / "pde")
    cfg = config.pde_config(eps, T)

    console.print(Panel.fit(f"🌊 [bold]PDE run[/bold] eps = {eps:g}, T = {cfg.time[1]:g}", style="cyan"))
    try:
        ic = make_ic_relax_shift(cfg, z0, config.pde.relax_seq)
        run = run_pde(cfg, ic)
    except HetfrontError as exc:
        _fail(exc)
    label = f"pde_eps_{eps:g}"
    path = write_trajectory(out / f"{label}.csv", run.trajectory, {"config": config.to_dict()})
    write_profile(out / f"{label}_final.csv", run.final)
    if run.snapshots:
        write_field(out / f"{label}_field.csv", run.snapshots)
    console.print(f"[green]✓[/green] {len(run.trajectory)} samples, z(T) = {run.trajectory.z[-1]:.4f}")
    console.print(f"[green]✓[/green] Trajectory: {path}")


@cli.command('dde-run')
@click.option('--algo', type=click.Choice(['1', '2']), default='1', show_default=True)
@click.option('--z0', type=float, default=0.0, show_default=True, help='Front position at s = 0')
@click.option('--speed', type=float, help='History speed (default: largest singular speed)')
@click.option('--T', 'T', type=float, help='Run length')
@click.option('--seed', type=int)
@click.option('--out', '-o', type=click.Path(path_type=Path), help='Output directory')
@click.pass_context
def dde_run(ctx, algo, z0, speed, T, seed, out):
    """Integrate the delay equation for the front position."""
    config = ctx.obj['config']
    algo = int(algo)
    cfg = config.dde_config(algo, seed)
    T = config.dde.T if T is None else T
    out = ensure_dir(out or config.output_dir / "dde")

    console.print(Panel.fit(f"⏱️ [bold]Delay equation[/bold] algorithm {algo}, T = {T:g}", style="cyan"))
    try:
        speed = speed_roots(config.model).c_p if speed is None else speed
        h0 = FrontHistory.constant_speed(z0, speed)
        bg = dde_background(config)
        if algo == 1:
            traj = dde_run_algo1(h0, T, cfg, bg)
        else:
            traj, _ = dde_run_algo2(h0, initial_vfield(h0, cfg, bg), T, cfg, bg)
    except HetfrontError as exc:
        _fail(exc)
    label = f"dde_algo{algo}"
    path = write_trajectory(out / f"{label}.csv", traj, {"seed": cfg.seed, "config": config.to_dict()})
    write_diagnostics(out / f"{label}_diagnostics.csv", traj.diagnostics)
    console.print(f"[green]✓[/green] {len(traj)} samples, z(T) = {traj.z[-1]:.4f}")
    console.print(f"[green]✓[/green] Trajectory: {path}")
    if traj.failed:
        console.print(f"[red]✗ run ended early: {traj.meta.get('error')}[/red]")
        sys.exit(1)


@cli.command()
@click.argument('example_id', type=click.Choice(EXAMPLE_IDS))
@click.option('--eps', 'eps', help='Comma-separated eps list, e.g. 0.1,0.05')
@click.option('--out', '-o', type=click.Path(path_type=Path), help='Output directory')
@click.option('--seed', type=int)
@click.option('--workers', type=int, help='Parallel PDE/DDE runs')
@click.pass_context
def example(ctx, example_id, eps, out, seed, workers):
    """Reproduce a named experiment and report its pass flags."""
    config = ctx.obj['config'] if ctx.obj['config_file'] else Config.for_example(example_id)
    overrides = {}
    if ctx.obj['config_file'] is None:
        overrides = dict(
            eps_list=[float(e) for e in eps.split(',')] if eps else None,
            out_dir=out, seed=seed, workers=workers,
        )

    console.print(Panel.fit(f"🧪 [bold]Example {example_id}[/bold]", style="cyan"))
    try:
        report = run_example(example_id, config=config, **overrides)
    except HetfrontError as exc:
        _fail(exc)

    table = Table(title="Metrics")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    for name, value in report.metrics.items():
        table.add_row(name, f"{value:.6g}")
    console.print(table)

    flags = Table(title="Pass flags")
    flags.add_column("Check", style="cyan")
    flags.add_column("Result")
    for name, ok in report.pass_flags.items():
        flags.add_row(name, "[green]✓ pass[/green]" if ok else "[red]✗ fail[/red]")
    console.print(flags)

    for label, message in report.failures.items():
        console.print(f"[yellow]⚠ {label}: {message}[/yellow]")
    if not report.passed:
        sys.exit(1)


@cli.command()
@click.argument('first', type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument('second', type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option('--anchor', help='z*,s* alignment anchor, e.g. 0.5,0')
@click.option('--window', help='s_lo,s_hi comparison window')
def compare(first, second, anchor, window):
    """Align two trajectory CSVs in time and print difference metrics."""
    try:
        a = read_trajectory(first)
        b = read_trajectory(second)
        anchor_pt = tuple(float(v) for v in anchor.split(',')) if anchor else None
        window_pt = tuple(float(v) for v in window.split(',')) if window else None
        if anchor_pt is not None:
            a = time_align(a, a, anchor_pt)
        metrics = compare_trajectories(a, time_align(a, b, anchor_pt), window_pt)
    except ValueError as exc:
        _fail(exc)

    table = Table(title=f"{first.name} vs {second.name}")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    for name, value in metrics.items():
        table.add_row(name, f"{value:.6g}")
    console.print(table)


@cli.command('config-init')
@click.argument('path', type=click.Path(dir_okay=False, path_type=Path))
@click.option('--example', '-e', type=click.Choice(EXAMPLE_IDS), default='ex0', show_default=True)
def config_init(path, example):
    """Write the config of a named example to PATH."""
    Config.for_example(example).save(path)
    console.print(f"[green]✓[/green] Wrote {example} config to {path}")


if __name__ == '__main__':
    cli()
