"""Command line interface: simulate, fit, rates, convergence, clt, stationary.

Every subcommand reads the same line-oriented config (``--config`` plus
repeatable ``--set section.key=value`` overrides), writes CSV artifacts, a
``manifest.json`` holding the full resolved configuration and seeds, and a
rendered PNG figure next to the delimited output.  Outputs are written to a
temp name and renamed on completion, so no partial artifacts survive a crash.

Exit codes: 0 success, 1 configuration/validation failure, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import plots
from .config import parse_config
from .density import run_pipeline
from .errors import ArkdeError, NumericalOverflowError
from .experiments import (
    clt_study,
    convergence_study,
    default_density_window,
    stationary_fixed_point,
)
from .files import write_csv, write_manifest
from .model import simulate, trajectory_to_csv
from .rng import generator_name
from .tuning import polynomial_schedule, truncated_schedule, v_at


def _out_dir(cfg, args):
    out = args.out if args.out else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(cfg, out, subcommand, extra=None):
    payload = {"subcommand": subcommand}
    if extra:
        payload.update(extra)
    return write_manifest(
        out / "manifest.json",
        cfg.resolved,
        {"seed": cfg.seed, "threads": cfg.threads},
        extra=payload,
    )


def cmd_simulate(cfg, args):
    out = _out_dir(cfg, args)
    traj = simulate(
        cfg.drift, cfg.noise, cfg.n, x0=cfg.x0, seed=cfg.seed,
        keep_noise=cfg.diagnostic,
    )
    trajectory_to_csv(traj, out / "trajectory.csv")
    plots.plot_trajectory(traj, out / "trajectory.png")
    _manifest(cfg, out, "simulate", {"n": cfg.n})
    print(f"simulate: wrote {out / 'trajectory.csv'} (n = {cfg.n}, d = {cfg.d})")
    return 0


def _threshold(cfg):
    if cfg.mode == "truncated":
        return lambda i: v_at(cfg.schedule, i)
    return None


def cmd_fit(cfg, args):
    out = _out_dir(cfg, args)
    grid = cfg.grid if cfg.grid is not None else default_density_window(cfg.noise)
    reg, dens, rep = run_pipeline(
        cfg.drift, cfg.noise, cfg.n, cfg.seed, cfg.kernel_f, cfg.beta,
        cfg.kernel_p, cfg.alpha, grid=grid, mode=cfg.mode,
        threshold_schedule=_threshold(cfg), checkpoints=cfg.checkpoints,
        diagnostic=cfg.diagnostic, oracle_residuals=cfg.oracle_residuals,
        x0=cfg.x0,
    )
    rows = []
    for t, n_c in enumerate(cfg.checkpoints):
        rows.append(
            (
                n_c,
                None if rep.sup_density_error is None else rep.sup_density_error[t],
                None if rep.avg_pred_error is None else rep.avg_pred_error[t],
                None if rep.residual_gap is None else rep.residual_gap[t],
                rep.runtime_per_step * n_c,
            )
        )
    comments = [f"rng = {generator_name()} seed = {cfg.seed} stream = 0"]
    write_csv(
        out / "checkpoints.csv",
        ["n", "sup_err_p", "avg_pred_err", "residual_gap", "runtime_s"],
        rows,
        comments,
    )
    nodes = grid.nodes()
    dens_vals = dens.density_on_grid().ravel()
    header = [f"y_{j + 1}" for j in range(cfg.d)] + ["p_hat"]
    cols = [nodes[:, j] for j in range(cfg.d)] + [dens_vals]
    if cfg.diagnostic:
        header.append("p_true")
        cols.append(cfg.noise.density(nodes))
    write_csv(out / "density.csv", header, list(zip(*cols)), comments)
    reg.save(out / "regression.npz")
    dens.save(out / "density.npz")
    if cfg.d == 1:
        plots.plot_density(
            nodes[:, 0], dens_vals,
            cfg.noise.density(nodes) if cfg.diagnostic else None,
            out / "density.png",
        )
    _manifest(cfg, out, "fit", {"n": cfg.n, "window": {"lo": grid.lo, "hi": grid.hi, "step": grid.step}})
    print(f"fit: wrote {out / 'checkpoints.csv'} and {out / 'density.csv'} (n = {cfg.n})")
    return 0


def _schedule_row(label, s):
    return (
        label, s.tail, s.v_form, s.beta, s.eta, s.tau_predicted, s.A, s.R,
        s.alpha_clt_lower, s.alpha_clt_upper,
        None if s.beta_interval is None else s.beta_interval[0],
        None if s.beta_interval is None else s.beta_interval[1],
        s.m_inv_rate,
    )


def cmd_rates(cfg, args):
    out = _out_dir(cfg, args)
    rows = [_schedule_row("resolved", cfg.schedule)]
    if cfg.schedule.tail == "polynomial":
        base = dict(delta=cfg.schedule.delta, m=cfg.schedule.m, d=cfg.d)
        if not cfg.schedule.truncated:
            rows.append(_schedule_row("truncated", truncated_schedule(beta=cfg.schedule.beta, **base)))
        else:
            try:
                rows.append(_schedule_row("plain", polynomial_schedule(**base)))
            except ArkdeError:
                pass
    header = [
        "schedule", "tail", "v_form", "beta", "eta", "tau", "A", "R",
        "alpha_lo", "alpha_hi", "beta_lo", "beta_hi", "m_inv_rate",
    ]
    write_csv(out / "rates.csv", header, rows)
    widths = [max(len(str(h)), 12) for h in header]
    fmt_row = lambda r: "  ".join(
        f"{('' if v is None else (f'{v:.6g}' if isinstance(v, float) else str(v))):>{w}}"
        for v, w in zip(r, widths)
    )
    print("  ".join(f"{h:>{w}}" for h, w in zip(header, widths)))
    for r in rows:
        print(fmt_row(r))
    _manifest(cfg, out, "rates")
    return 0


def cmd_convergence(cfg, args):
    out = _out_dir(cfg, args)
    rep = convergence_study(
        cfg.drift, cfg.noise, cfg.schedule, cfg.alpha, cfg.beta,
        cfg.kernel_f, cfg.kernel_p, cfg.n_grid, cfg.seed,
        mode=cfg.mode, window=cfg.grid, oracle_residuals=cfg.oracle_residuals,
        x0=cfg.x0,
    )
    comments = [f"rng = {generator_name()} seed = {cfg.seed} stream = 0"]
    write_csv(
        out / "convergence.csv",
        ["n", "sup_err_f", "sup_err_p", "avg_pred_err"],
        list(zip(rep.n_values, rep.sup_err_f, rep.sup_err_p, rep.avg_pred_err)),
        comments,
    )
    plots.plot_convergence(rep, out / "convergence.png")
    _manifest(
        cfg, out, "convergence",
        {
            "slopes": {
                "sup_err_f": rep.fitted_slope_f,
                "sup_err_p": rep.fitted_slope_p,
                "avg_pred_err": rep.fitted_slope_pred,
                "predicted_avg_pred": rep.predicted_slope_pred,
            },
            "drop_first": rep.drop_first,
        },
    )
    print(
        "convergence: slopes "
        f"f {rep.fitted_slope_f:.3f}, p {rep.fitted_slope_p:.3f}, "
        f"pred {rep.fitted_slope_pred:.3f} (predicted {rep.predicted_slope_pred:.3f})"
    )
    return 0


def cmd_clt(cfg, args):
    out = _out_dir(cfg, args)
    rep = clt_study(
        cfg.drift, cfg.noise, cfg.schedule, cfg.alpha, cfg.beta,
        cfg.kernel_f, cfg.kernel_p, cfg.n, cfg.replicates, cfg.y_points,
        cfg.seed, oracle_residuals=cfg.oracle_residuals, threads=cfg.threads,
        x0=cfg.x0,
    )
    q = rep.y_points.shape[0]
    comments = [f"rng = {generator_name()} base_seed = {cfg.seed} streams = 0..{cfg.replicates - 1}"]
    header = ["replicate", "stream"]
    for j in range(q):
        header += [f"p_hat_{j + 1}", f"z_{j + 1}"]
    rows = []
    for r in range(rep.replicates):
        row = [r, rep.streams[r]]
        for j in range(q):
            row += [rep.p_hat[r, j], rep.z_values[r, j]]
        rows.append(row)
    write_csv(out / "zvalues.csv", header, rows, comments)
    sum_header = (
        [f"y_{j + 1}" for j in range(cfg.d)]
        + ["p_true", "theory_var", "ks_distance", "variance_ratio"]
    )
    sum_rows = [
        list(rep.y_points[j]) + [rep.p_true[j], rep.theory_var[j],
                                 rep.ks_distance[j], rep.variance_ratio[j]]
        for j in range(q)
    ]
    write_csv(out / "clt_summary.csv", sum_header, sum_rows, comments)
    write_csv(
        out / "correlation.csv",
        [f"y{j + 1}" for j in range(q)],
        [list(rep.pairwise_correlation[j]) for j in range(q)],
    )
    plots.plot_clt(rep, out / "clt.png")
    _manifest(
        cfg, out, "clt",
        {"n": rep.n, "replicates": rep.replicates,
         "ks": rep.ks_distance.tolist(), "variance_ratio": rep.variance_ratio.tolist()},
    )
    print(
        f"clt: M = {rep.replicates}, n = {rep.n}, "
        f"max KS = {rep.ks_distance.max():.4f}, "
        f"variance ratios = {np.round(rep.variance_ratio, 3).tolist()}"
    )
    return 0


def cmd_stationary(cfg, args):
    out = _out_dir(cfg, args)
    grid = cfg.grid if cfg.grid is not None else default_density_window(cfg.noise)
    sd = stationary_fixed_point(cfg.drift, cfg.noise, grid)
    axis = grid.axis(0)
    write_csv(out / "stationary.csv", ["x", "h"], list(zip(axis, sd.values)))
    plots.plot_stationary(sd, out / "stationary.png")
    _manifest(
        cfg, out, "stationary",
        {"iterations": sd.iterations, "final_delta": sd.final_delta,
         "converged": sd.converged},
    )
    print(
        f"stationary: {sd.iterations} sweeps, final sup-change {sd.final_delta:.3g}, "
        f"converged = {sd.converged}"
    )
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "rates": cmd_rates,
    "convergence": cmd_convergence,
    "clt": cmd_clt,
    "stationary": cmd_stationary,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="arkde",
        description="Residual-based recursive innovation-density estimation studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="config file path")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[],
            metavar="KEY=VALUE", help="override a config key (repeatable)",
        )
        p.add_argument("--out", type=_path_arg, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
    return parser


def _path_arg(s):
    from pathlib import Path

    return Path(s)


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"io.seed={args.seed}")
    if args.threads is not None:
        overrides.append(f"io.threads={args.threads}")
    try:
        cfg = parse_config(args.config, overrides)
        return _COMMANDS[args.command](cfg, args)
    except NumericalOverflowError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ArkdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
