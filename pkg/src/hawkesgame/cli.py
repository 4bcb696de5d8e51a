"""Command-line entry point: ``hawkesgame {run,sweep,analyze,trace}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiment import (
    CONFIG_KEYS,
    PRESETS,
    SCALES,
    ConfigError,
    ExperimentConfig,
    aggregate,
    build_config,
    make_engine,
    parse_overrides,
    read_results_csv,
    replicate_seed,
    run_sweep,
    save_sweep,
    stats_rows,
    write_manifest,
    write_summary_csv,
)
from .point_process import intensity_at
from .sampler import LatticeSampler

log = logging.getLogger("hawkesgame")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_PARTIAL = 3

# flag -> config key
_PARAM_FLAGS = {
    "--L": "L", "--k": "k", "--b": "b", "--alpha": "alpha", "--nu": "nu", "--mu": "mu",
    "--case": "cases", "--t-g": "t_G", "--g-end": "G_end", "--g-ave": "G_ave",
    "--replicates": "replicates", "--seed": "seed", "--jobs": "jobs", "--out": "out",
    "--beta-override": "beta", "--dump-grid": "dump_grid",
}


def _keys_epilog() -> str:
    defaults = ExperimentConfig()
    lines = ["config keys (file 'key = value', or --set key=value):"]
    for name, key in CONFIG_KEYS.items():
        default = defaults.to_lines()[list(CONFIG_KEYS).index(name)].split("=", 1)[1].strip()
        lines.append(f"  {name:<24} [{key.unit}] {key.help} (default: {default})")
    lines.append("")
    lines.append("scales: " + "; ".join(f"{n}: " + ", ".join(f"{k}={v}" for k, v in s.items())
                                        for n, s in SCALES.items()))
    lines.append("presets: " + ", ".join(PRESETS))
    lines.append("exit codes: 0 ok, 1 runtime or I/O error, 2 invalid configuration, 3 some sweep cells failed")
    return "\n".join(lines)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="config file of 'key = value' lines")
    g.add_argument("--preset", choices=sorted(PRESETS), help="experiment grid preset")
    g.add_argument("--scale", choices=sorted(SCALES), help="lattice size / generation / replicate preset")
    g.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; repeatable")
    g.add_argument("--dump-events", action="store_true", help="write events.csv (run, trace)")
    for flag, key in _PARAM_FLAGS.items():
        g.add_argument(flag, dest=f"opt_{key}", metavar="VALUE", help=f"sets '{key}': {CONFIG_KEYS[key].help}")


def _config_from_args(args) -> ExperimentConfig:
    raw = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    for key in CONFIG_KEYS:
        v = getattr(args, f"opt_{key}", None)
        if v is not None:
            raw[key] = v
    if args.dump_events:
        raw["dump_events"] = "true"
    overrides = parse_overrides(raw)
    return build_config(preset=args.preset, scale=args.scale, config_path=args.config, overrides=overrides)


def _single_cell(cfg: ExperimentConfig):
    cells = cfg.cells()
    if len(cells) != 1:
        raise ConfigError(f"this command needs exactly one cell, the config gives {len(cells)}; "
                          "fix --case, --b, --alpha and --nu to single values")
    return cells[0]


def _write_events(path: Path, windows, L: int) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["generation", "time", "agent_row", "agent_col"])
        for g, tl in windows:
            rows, cols = np.divmod(tl.agents, L)
            for t, r, c in zip(tl.times, rows, cols):
                w.writerow([g, repr(float(t)), int(r), int(c)])


def _grid_text(cooperate: np.ndarray, L: int) -> str:
    grid = np.where(cooperate.reshape(L, L), "C", "D")
    return "\n".join("".join(row) for row in grid) + "\n"


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    cell = _single_cell(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = replicate_seed(cfg.seed, cell, 0)
    engine = make_engine(cfg, cell, seed)
    stats, windows = [], []
    grid_dir = out / "grids"
    for g in range(cfg.G_end):
        if cfg.dump_grid and g % cfg.dump_grid == 0:
            grid_dir.mkdir(exist_ok=True)
            (grid_dir / f"gen_{g:06d}.txt").write_text(_grid_text(engine.pop.cooperate, cfg.L))
        stats.append(engine.step())
        if cfg.dump_events and engine.last_timeline is not None:
            windows.append((g, engine.last_timeline))
    with open(out / "timeseries.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["generation", "f_C", "mean_d", "sigma_d", "gamma_1", "r_d"])
        w.writerows(stats_rows(stats))
    if cfg.dump_events:
        _write_events(out / "events.csv", windows, cfg.L)
    rho = engine.kernel.rho if engine.kernel else None
    write_manifest(cfg, out / "manifest.txt", command="run", replicate_seed=seed, rho=rho)
    if not args.no_plots:
        from .report import plot_timeseries, set_style

        set_style()
        case, b, alpha, nu = cell
        plot_timeseries(stats, out / "timeseries.png", title=f"{case.value}, b={b:g}, α={alpha:g}, ν={nu:g}")
    tail = stats[-cfg.G_ave:]
    log.info("f_C over last %d generations: %.4f", cfg.G_ave, float(np.mean([s.f_C for s in tail])))
    print(out / "timeseries.csv")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    n = len(cfg.cells()) * cfg.replicates
    log.info("sweep: %d cells x %d replicates", len(cfg.cells()), cfg.replicates)

    def progress(done, total):
        log.debug("%d/%d trials", done, total)

    result = run_sweep(cfg, progress=progress)
    path = save_sweep(result, cfg.out)
    log.info("wrote %d of %d replicate rows to %s", len(result.rows), n, path)
    if args.report:
        _analyze(path, Path(cfg.out), plots=not args.no_plots)
    print(path)
    if result.failures:
        print(f"{len(result.failed_cells)} cell(s) failed; see {Path(cfg.out) / 'failures.csv'}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _analyze(results: Path, out: Path, plots: bool = True) -> list[Path]:
    rows = read_results_csv(results)
    if not rows:
        raise ValueError(f"{results} has no replicate rows")
    summary = aggregate(rows)
    # figures import matplotlib; do it before anything is written
    from .report import render_figures, write_figure_data

    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(summary, out / "summary.csv")
    written = [out / "summary.csv"] + write_figure_data(summary, out)
    if plots:
        written += render_figures(summary, out)
    return written


def cmd_analyze(args) -> int:
    results = Path(args.results)
    if results.is_dir():
        results = results / "results.csv"
    if not results.is_file():
        print(f"error: no results file at {results}", file=sys.stderr)
        return EXIT_FAILURE
    out = Path(args.out) if args.out else results.parent
    try:
        written = _analyze(results, out, plots=not args.no_plots)
    except (ValueError, KeyError) as e:
        print(f"error: cannot read {results}: {e}", file=sys.stderr)
        return EXIT_FAILURE
    for p in written:
        print(p)
    return EXIT_OK


def cmd_trace(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    case, b, alpha, nu = _single_cell(cfg)
    if not case.uses_hawkes:
        raise ConfigError("trace needs a timing process; the standard case has none")
    row, col = (int(v) for v in args.agent.split(","))
    if not (0 <= row < cfg.L and 0 <= col < cfg.L):
        raise ConfigError(f"agent {row},{col} is outside the {cfg.L}x{cfg.L} lattice")
    kernel = cfg.kernel_params(case, alpha, nu)
    engine = make_engine(cfg, (case, b, alpha, nu), replicate_seed(cfg.seed, (case, b, alpha, nu), 0))
    lattice = engine.lattice
    # starts from an empty history so the curve begins at rho
    sampler = LatticeSampler(kernel, lattice, engine.rng, carry_history=True, burn_in=0.0)
    windows = [(g, sampler.next_window(cfg.t_G)) for g in range(args.windows)]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_events(out / "events.csv", windows, cfg.L)

    i = row * cfg.L + col
    nbrs = set(lattice.neighbors[i].tolist())
    own, other = [], []
    for g, tl in windows:
        for t, a in zip(tl.times, tl.agents):
            if a == i:
                own.append(g * cfg.t_G + float(t))
            elif a in nbrs:
                other.append(g * cfg.t_G + float(t))
    horizon = args.windows * cfg.t_G
    grid = np.union1d(np.linspace(0, horizon, 1500, endpoint=False), np.asarray(own + other) + 1e-9)
    lam = np.array([intensity_at(kernel, [s for s in own if s < t], [s for s in other if s < t], t) for t in grid])
    with open(out / "intensity.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["time", "intensity"])
        w.writerows([repr(float(t)), repr(float(v))] for t, v in zip(grid, lam))
    write_manifest(cfg, out / "manifest.txt", command="trace", agent=f"{row},{col}", windows=args.windows)
    if not args.no_plots:
        from .report import plot_trace, set_style

        set_style()
        plot_trace(grid, lam, own, out / "trace.png", rho=kernel.rho)
    print(out / "events.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hawkesgame",
        description="Spatial donation game with Hawkes-process action timing.",
        epilog=_keys_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help, epilog=_keys_epilog(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = add("run", cmd_run, "run one trial and write the per-generation time series")
    _add_config_args(p)
    p.add_argument("--no-plots", action="store_true", help="skip the PNG rendering")

    p = add("sweep", cmd_sweep, "run every cell x replicate of a grid and write results.csv")
    _add_config_args(p)
    p.add_argument("--report", action="store_true", help="also run analyze on the result")
    p.add_argument("--no-plots", action="store_true", help="with --report, skip the PNG rendering")

    p = sub.add_parser("analyze", help="aggregate results.csv into summary.csv and figure data")
    p.set_defaults(func=cmd_analyze)
    p.add_argument("results", help="results.csv or the directory holding it")
    p.add_argument("--out", help="output directory (default: next to the results)")
    p.add_argument("--no-plots", action="store_true", help="write data files only")

    p = add("trace", cmd_trace, "dump raw events and one agent's intensity curve")
    _add_config_args(p)
    p.add_argument("--windows", type=int, default=10, help="number of t_G windows to trace (default: 10)")
    p.add_argument("--agent", default="0,0", metavar="ROW,COL", help="agent whose intensity is traced")
    p.add_argument("--no-plots", action="store_true", help="skip the PNG rendering")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
