"""Command-line front end: runs the scans and emits plot-ready CSV data.

Subcommands
-----------
bifurcation     classical attractor samples over the epsilon grid
delta-series    per-kick quantum negativity series for selected epsilons
wigner          Wigner field snapshot of one run at a chosen kick
rqa             delay/dimension estimation + recurrence quantification
entropy-sweep   spectral entropy of delta_n over the epsilon grid

Every command writes CSV files with a '#'-prefixed metadata header plus a
manifest with content hashes.  Identical config and seed give
byte-identical outputs.  Worker count for sweeps comes from the
KICKEDKERR_WORKERS environment variable.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 partial
sweep failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import classical, dynamics, entropy, tsa, wigner
from .config import ConfigError, RunConfig, verify_manifest, write_manifest
from .dynamics import IntegrationDiverged
from .fock import TruncationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header: list[str], rows, meta: dict) -> None:
    with open(path, "w") as f:
        for k, v in meta.items():
            f.write(f"# {k} = {_fmt(v)}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _meta(cfg: RunConfig, **extra) -> dict:
    base = {"chi": cfg.chi, "gamma": cfg.gamma, "period": cfg.period}
    base.update(extra)
    return base


def cmd_bifurcation(cfg: RunConfig, out: Path, args) -> int:
    eps_grid = np.round(np.arange(cfg.eps_min, cfg.eps_max + cfg.eps_step / 2,
                                  cfg.eps_step), 12)
    p = cfg.classical_params(epsilon=0.0)
    data = classical.bifurcation_scan(eps_grid, p, transient=cfg.transient,
                                      retained=cfg.retained, mode=cfg.bifurcation_mode)
    rows = [(e, k, data.samples[i, k])
            for i, e in enumerate(data.epsilons) for k in range(cfg.retained)]
    name = "bifurcation.csv"
    _write_csv(out / name, ["epsilon", "sample_index", "energy"],
               rows, _meta(cfg, mode=data.mode, n_traj=cfg.n_traj, radius=cfg.radius,
                           seed=cfg.seed, transient=cfg.transient,
                           retained=cfg.retained, rng=classical.RNG_ALGORITHM))
    write_manifest(out, "bifurcation", cfg, [name])
    return EXIT_OK


def _run_record(cfg: RunConfig, eps: float) -> dynamics.KickSeriesRecord:
    return dynamics.run_kicked_evolution(cfg.model_params(eps),
                                         grid_points=cfg.grid_points)


def cmd_delta_series(cfg: RunConfig, out: Path, args) -> int:
    files, failed = [], []
    for eps in cfg.epsilons:
        name = f"delta_series_eps{eps:g}.csv"
        try:
            rec = _run_record(cfg, eps)
        except (TruncationError, IntegrationDiverged, wigner.MassDefect) as exc:
            failed.append((eps, f"{type(exc).__name__}: {exc}"))
            continue
        rows = [(k + 1, rec.delta[k], rec.delta_n[k], rec.mean_n[k], rec.trace_defect[k])
                for k in range(cfg.kicks)]
        _write_csv(out / name, ["kick", "delta", "delta_n", "mean_n", "trace_defect"],
                   rows, _meta(cfg, epsilon=eps, kicks=cfg.kicks, dim=cfg.dim))
        files.append(name)
    extra = {"failed": [{"epsilon": e, "error": msg} for e, msg in failed]}
    write_manifest(out, "delta-series", cfg, files, extra=extra)
    if failed:
        for eps, msg in failed:
            print(f"epsilon={eps}: {msg}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_wigner(cfg: RunConfig, out: Path, args) -> int:
    eps = args.epsilon if args.epsilon is not None else cfg.rqa_epsilon
    kick_index = args.kick
    if kick_index < 0 or kick_index > cfg.kicks:
        print(f"kick index {kick_index} outside run of {cfg.kicks} kicks",
              file=sys.stderr)
        return EXIT_CONFIG
    if kick_index == 0:
        rho = np.zeros((cfg.dim, cfg.dim), dtype=np.complex128)
        rho[0, 0] = 1.0
    else:
        params = replace(cfg.model_params(eps), kicks=kick_index)
        rec = dynamics.run_kicked_evolution(params, snapshot_schedule=(kick_index,),
                                            compute_delta=False)
        rho = rec.snapshots[kick_index]
    grid = cfg.phase_grid()
    fld = wigner.wigner_grid(rho, grid)
    name = f"wigner_eps{eps:g}_kick{kick_index}.csv"
    meta = _meta(cfg, epsilon=eps, kick=kick_index, dim=cfg.dim,
                 re_min=grid.re_min, re_max=grid.re_max, im_min=grid.im_min,
                 im_max=grid.im_max, n_re=grid.n_re, n_im=grid.n_im,
                 cell_area=grid.cell_area, mass=fld.mass,
                 delta=wigner.negativity_delta(fld))
    rows = ([fld.values[i, j] for j in range(grid.n_im)] for i in range(grid.n_re))
    _write_csv(out / name, [f"im{j}" for j in range(grid.n_im)], rows, meta)
    write_manifest(out, "wigner", cfg, [name])
    return EXIT_OK


def cmd_rqa(cfg: RunConfig, out: Path, args) -> int:
    eps = args.epsilon if args.epsilon is not None else cfg.rqa_epsilon
    if args.input:
        raw = np.loadtxt(args.input, delimiter=",", comments="#", skiprows=0,
                         usecols=(2,))  # delta_n column of a delta-series file
        values = raw[cfg.series_drop:]
    else:
        rec = _run_record(cfg, eps)
        values = rec.delta_n[cfg.series_drop:]
    try:
        series = tsa.Series(values, dt=cfg.period)
        delay = tsa.estimate_delay(series, max_lag=cfg.max_lag)
        emb = tsa.estimate_embedding_dim(series, delay.tau, max_dim=cfg.max_dim)
        traj = tsa.embed(series, delay.tau, emb.dim)
    except tsa.SeriesTooShort as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    files = []
    summary_rows = []
    for rr in cfg.rr_targets:
        thr = tsa.threshold_for_recurrence_rate(traj, rr, cfg.norm, cfg.theiler)
        R = tsa.recurrence_matrix(traj, thr, cfg.norm)
        report = tsa.rqa_measures(R, l_min=cfg.l_min, theiler=cfg.theiler)
        tag = f"rr{int(round(100 * rr))}"
        coord_name = f"rqa_{tag}_points.csv"
        _write_csv(out / coord_name, ["i", "j"],
                   tsa.recurrence_to_coordinates(R),
                   _meta(cfg, epsilon=eps, rr_target=rr, eps_thr=thr,
                         norm=cfg.norm, tau=delay.tau, d=emb.dim))
        pbm_name = f"rqa_{tag}_matrix.pbm"
        (out / pbm_name).write_text(tsa.recurrence_to_pbm(R))
        hist_name = f"rqa_{tag}_diag_histogram.csv"
        _write_csv(out / hist_name, ["length", "count"],
                   sorted(report.diag_histogram.items()),
                   _meta(cfg, epsilon=eps, rr_target=rr, eps_thr=thr))
        report_name = f"rqa_{tag}_report.txt"
        (out / report_name).write_text(
            f"epsilon {eps!r}\ntau {delay.tau}\nembedding_dim {emb.dim}\n"
            f"rr_target {rr!r}\neps_thr {thr!r}\n" + tsa.report_to_text(report))
        files += [coord_name, pbm_name, hist_name, report_name]
        summary_rows.append((rr, thr, report.recurrence_rate, report.det,
                             report.l_max, report.l_avg, report.lam, report.tt))
    summary_name = "rqa_summary.csv"
    _write_csv(out / summary_name,
               ["rr_target", "eps_thr", "recurrence_rate", "det", "l_max",
                "l_avg", "lam", "tt"],
               summary_rows,
               _meta(cfg, epsilon=eps, tau=delay.tau, embedding_dim=emb.dim,
                     delay_found_minimum=delay.found_minimum,
                     fnn_converged=emb.converged, series_drop=cfg.series_drop))
    files.append(summary_name)
    write_manifest(out, "rqa", cfg, files,
                   extra={"tau": delay.tau, "embedding_dim": emb.dim})
    return EXIT_OK


def cmd_entropy_sweep(cfg: RunConfig, out: Path, args) -> int:
    guard_tol = 1e-6
    if args.smoke:
        cfg = cfg.with_override("model.kicks=200")
        cfg = cfg.with_override("model.dim=48")
        cfg = cfg.with_override("grid.grid_points=64")
        cfg = cfg.with_override("entropy.t_max=200")
        guard_tol = 1e-2   # dim=48 leaks ~1e-3 above level 38 in the chaotic band
    eps_grid = cfg.eps_grid()
    base = cfg.model_params(epsilon=0.0)
    data = entropy.entropy_sweep(eps_grid, base, window=(cfg.t_min, cfg.t_max),
                                 grid_points=cfg.grid_points,
                                 cutoff_guard_tol=guard_tol)
    name = "entropy_sweep.csv"
    rows = [(e, data.entropies[i], int(data.ok[i]), data.errors[i] or "")
            for i, e in enumerate(data.epsilons)]
    _write_csv(out / name, ["epsilon", "entropy", "ok", "error"], rows,
               _meta(cfg, **data.metadata))
    files = [name]
    summary = {}
    try:
        regular = entropy.band_mean_abs_diff(data, 0.1, 0.6)
        chaotic = entropy.band_mean_abs_diff(data, 1.0, 1.4)
        summary = {"mean_abs_diff_regular": regular,
                   "mean_abs_diff_chaotic": chaotic,
                   "ratio": chaotic / regular if regular > 0 else float("inf")}
        sm_name = "entropy_smoothness.csv"
        _write_csv(out / sm_name, ["band", "mean_abs_diff"],
                   [("0.1-0.6", regular), ("1.0-1.4", chaotic)],
                   _meta(cfg, ratio=summary["ratio"]))
        files.append(sm_name)
    except ValueError:
        pass  # grid does not cover both bands
    write_manifest(out, "entropy-sweep", cfg, files, extra=summary)
    if not data.ok.all():
        for i, err in enumerate(data.errors):
            if err:
                print(f"epsilon={data.epsilons[i]}: {err}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kickedkerr", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", help="INI config file (defaults are built in)")
    ap.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                    help="override one config entry (repeatable)")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("bifurcation")
    sub.add_parser("delta-series")
    w = sub.add_parser("wigner")
    w.add_argument("--kick", type=int, required=True,
                   help="kick index of the snapshot (0 = initial vacuum)")
    w.add_argument("--epsilon", type=float, default=None)
    r = sub.add_parser("rqa")
    r.add_argument("--epsilon", type=float, default=None)
    r.add_argument("--input", default=None,
                   help="read delta_n from a delta-series CSV instead of running")
    e = sub.add_parser("entropy-sweep")
    e.add_argument("--smoke", action="store_true",
                   help="reduced mode: dim=48, 200 kicks, 64x64 grid")
    return ap


_COMMANDS = {
    "bifurcation": cmd_bifurcation,
    "delta-series": cmd_delta_series,
    "wigner": cmd_wigner,
    "rqa": cmd_rqa,
    "entropy-sweep": cmd_entropy_sweep,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.set)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"config error: cannot create output dir: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    # config echo for reproducibility
    (out / "config_echo.ini").write_text(cfg.to_ini())
    try:
        return _COMMANDS[args.command](cfg, out, args)
    except (TruncationError, IntegrationDiverged, wigner.MassDefect) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
