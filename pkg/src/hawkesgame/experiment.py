"""Configuration, replicate orchestration, sweeps, aggregation and persistence."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .game_core import Engine, GameParams
from .lattice import Lattice
from .metrics import GenerationStats, average_stats
from .point_process import CaseKind, StationarityError, params_for_case

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["case", "b", "alpha", "nu", "rho", "replicate", "seed",
                  "f_C", "mean_d", "sigma_d", "gamma_1", "r_d"]
METRICS = ["f_C", "mean_d", "sigma_d", "gamma_1", "r_d"]
_CASE_ORDER = list(CaseKind)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _float_grid(text: str) -> tuple[float, ...]:
    """Comma-separated values, or ``start:stop:step`` with stop inclusive."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError(f"range step must be > 0, got {step}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(n))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _case_list(text: str) -> tuple[CaseKind, ...]:
    return tuple(CaseKind.parse(v) for v in str(text).split(",") if v.strip())


def _bool(text: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str) -> Optional[float]:
    v = str(text).strip().lower()
    return None if v in ("", "none", "auto") else float(v)


@dataclass(frozen=True)
class ConfigKey:
    parse: Callable[[str], Any]
    unit: str
    help: str


CONFIG_KEYS: dict[str, ConfigKey] = {
    "L": ConfigKey(int, "agents per side", "lattice side length, N = L*L"),
    "k": ConfigKey(int, "neighbours", "neighbourhood size, 4 (von Neumann) or 8 (Moore)"),
    "b": ConfigKey(_float_grid, "payoff units", "grid of defector's advantage values, list or start:stop:step"),
    "cases": ConfigKey(_case_list, "-", "comma list of standard, poisson, endo, exo"),
    "alpha": ConfigKey(_float_grid, "dimensionless", "grid of excitation strengths, each in [0, 1)"),
    "nu": ConfigKey(_float_grid, "dimensionless", "grid of kernel shape factors, each > 0"),
    "mu": ConfigKey(float, "probability", "mutation probability per agent per update"),
    "t_G": ConfigKey(float, "time units", "duration of one donation stage"),
    "target_rate": ConfigKey(float, "events per time unit", "mean action rate used to calibrate rho"),
    "G_end": ConfigKey(int, "generations", "generations per trial"),
    "G_ave": ConfigKey(int, "generations", "final generations averaged into trial statistics"),
    "replicates": ConfigKey(int, "runs", "independent trials per cell"),
    "seed": ConfigKey(int, "-", "master seed"),
    "out": ConfigKey(str, "path", "output directory"),
    "jobs": ConfigKey(int, "processes", "worker processes, 0 = all CPUs"),
    "beta": ConfigKey(_opt_float, "per time unit", "decay ratio override; auto = 1 (poisson, endo) or k (exo)"),
    "carry_history": ConfigKey(_bool, "-", "continue the timing process across generations (else restart each one)"),
    "count_defector_actions": ConfigKey(_bool, "-", "include defectors' actions in d_i"),
    "sigma_raw": ConfigKey(_bool, "-", "report sigma_d as the unrooted sample variance"),
    "dump_events": ConfigKey(_bool, "-", "run/trace: write events.csv"),
    "dump_grid": ConfigKey(int, "generations", "run: write the strategy grid every M generations, 0 = never"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    L: int = 30
    k: int = 4
    b: tuple[float, ...] = (1.5,)
    cases: tuple[CaseKind, ...] = (CaseKind.STANDARD, CaseKind.POISSON, CaseKind.ENDO, CaseKind.EXO)
    alpha: tuple[float, ...] = (0.5,)
    nu: tuple[float, ...] = (1.0,)
    mu: float = 0.01
    t_G: float = 1.0
    target_rate: float = 1.0
    G_end: int = 1000
    G_ave: int = 200
    replicates: int = 10
    seed: int = 0
    out: str = field(default_factory=lambda: os.environ.get("HAWKESGAME_OUT", "results"))
    jobs: int = 0
    beta: Optional[float] = None
    carry_history: bool = True
    count_defector_actions: bool = True
    sigma_raw: bool = False
    dump_events: bool = False
    dump_grid: int = 0

    def with_updates(self, **changes) -> "ExperimentConfig":
        unknown = set(changes) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config key(s) {sorted(unknown)}; valid keys: {', '.join(CONFIG_KEYS)}")
        return dataclasses.replace(self, **changes)

    def cells(self) -> list[tuple[CaseKind, float, float, float]]:
        return [(c, b, a, n) for c in self.cases for b in self.b for a in self.alpha for n in self.nu]

    def validate(self) -> None:
        """Check every field and every cell's stationarity before anything runs."""
        try:
            Lattice(self.L, self.k)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if not self.cases or not self.b or not self.alpha or not self.nu:
            raise ConfigError("cases, b, alpha and nu grids must be non-empty")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        for case, b, alpha, nu in self.cells():
            try:
                GameParams(b=b, mu=self.mu, t_G=self.t_G, G_end=self.G_end, G_ave=self.G_ave, case=case)
                self.kernel_params(case, alpha, nu)
            except (ValueError, StationarityError) as e:
                raise ConfigError(f"cell case={case.value} b={b:g} alpha={alpha:g} nu={nu:g}: {e}") from None

    def kernel_params(self, case, alpha, nu):
        return params_for_case(case, alpha, nu, self.k, self.target_rate, self.beta)

    def to_lines(self) -> list[str]:
        lines = []
        for name in CONFIG_KEYS:
            lines.append(f"{name} = {format_value(getattr(self, name))}")
        return lines


def format_value(v) -> str:
    if isinstance(v, CaseKind):
        return v.value
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(format_value(x) for x in v)
    if v is None:
        return "auto"
    return str(v)


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return parse_overrides(values)


def parse_overrides(raw: dict[str, str]) -> dict[str, Any]:
    out = {}
    for key, value in raw.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}; valid keys: {', '.join(CONFIG_KEYS)}")
        try:
            out[key] = CONFIG_KEYS[key].parse(value)
        except ValueError as e:
            raise ConfigError(f"bad value for {key}: {e}") from None
    return out


def load_config(path) -> dict[str, Any]:
    return parse_config_text(Path(path).read_text())


SCALES = {
    "desk": dict(L=30, G_end=1000, G_ave=200, replicates=10),
    "paper": dict(L=100, G_end=3000, G_ave=500, replicates=100),
}

_ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
_NU_GRID = (1.0, 2.0, 3.0, 4.0, 5.0)
_B_GRID = tuple(round(1.1 + 0.1 * i, 1) for i in range(20))

PRESETS = {
    # f_C against b for the four cases
    "exp1": dict(cases=tuple(CaseKind), b=_B_GRID, alpha=(0.5,), nu=(1.0,)),
    # f_C against b while varying alpha or nu, for the two cascade cases
    "alpha_sweep": dict(cases=(CaseKind.POISSON, CaseKind.ENDO, CaseKind.EXO), b=_B_GRID,
                 alpha=(0.1, 0.3, 0.5, 0.7, 0.9), nu=(1.0,)),
    # indices against f_C at four fixed b values
    "exp2": dict(cases=(CaseKind.POISSON, CaseKind.ENDO, CaseKind.EXO), b=(1.5, 1.9, 2.3, 2.7),
                 alpha=_ALPHA_GRID, nu=_NU_GRID),
    # indices against alpha and nu at b = 1.1
    "indices": dict(cases=(CaseKind.POISSON, CaseKind.ENDO, CaseKind.EXO), b=(1.1,),
                 alpha=_ALPHA_GRID, nu=_NU_GRID),
}


def build_config(
    preset: Optional[str] = None,
    scale: Optional[str] = None,
    config_path=None,
    overrides: Optional[dict[str, Any]] = None,
) -> ExperimentConfig:
    """Layer scale, preset, config file and overrides, later layers winning."""
    cfg = ExperimentConfig()
    if scale is not None:
        if scale not in SCALES:
            raise ConfigError(f"unknown scale {scale!r}; expected one of {sorted(SCALES)}")
        cfg = cfg.with_updates(**SCALES[scale])
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        cfg = cfg.with_updates(**PRESETS[preset])
    if config_path is not None:
        try:
            cfg = cfg.with_updates(**load_config(config_path))
        except OSError as e:
            raise ConfigError(f"cannot read config {config_path}: {e}") from None
    if overrides:
        cfg = cfg.with_updates(**overrides)
    return cfg


# ---------------------------------------------------------------------------
# runs


@dataclass(frozen=True)
class ReplicateRow:
    case: CaseKind
    b: float
    alpha: float
    nu: float
    rho: Optional[float]
    replicate: int
    seed: int
    f_C: float
    mean_d: float
    sigma_d: float
    gamma_1: Optional[float]
    r_d: float

    @property
    def cell(self):
        return (self.case, self.b, self.alpha, self.nu)


def replicate_seed(master_seed: int, cell, replicate: int) -> int:
    """Seed that depends only on the master seed, the cell values and the replicate."""
    case, b, alpha, nu = cell
    key = (_CASE_ORDER.index(CaseKind.parse(case)), round(b * 1e6), round(alpha * 1e6), round(nu * 1e6), replicate)
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def make_engine(config: ExperimentConfig, cell, seed: int) -> Engine:
    case, b, alpha, nu = cell
    game = GameParams(b=b, mu=config.mu, t_G=config.t_G, G_end=config.G_end, G_ave=config.G_ave,
                      case=case, count_defector_actions=config.count_defector_actions)
    kernel = config.kernel_params(case, alpha, nu)
    return Engine(Lattice(config.L, config.k), game, kernel, np.random.default_rng(seed),
                  carry_history=config.carry_history, sigma_raw=config.sigma_raw)


def run_cell(config: ExperimentConfig, cell, replicate: int) -> ReplicateRow:
    case, b, alpha, nu = cell
    case = CaseKind.parse(case)
    seed = replicate_seed(config.seed, cell, replicate)
    engine = make_engine(config, (case, b, alpha, nu), seed)
    stats = engine.run(full_stats_from=config.G_end - config.G_ave)
    avg = average_stats(stats[-config.G_ave:])
    return ReplicateRow(case, b, alpha, nu, engine.kernel.rho if engine.kernel else None,
                        replicate, seed, avg.f_C, avg.mean_d, avg.sigma_d, avg.gamma_1, avg.r_d)


def _job(args):
    config, cell, replicate = args
    try:
        return run_cell(config, cell, replicate), None
    except Exception as e:  # a failing cell must not take the sweep down
        return None, f"{type(e).__name__}: {e}"


@dataclass
class CellSummary:
    case: CaseKind
    b: float
    alpha: float
    nu: float
    rho: Optional[float]
    n: int
    stats: dict[str, dict[str, Optional[float]]]

    def mean(self, metric: str) -> Optional[float]:
        return self.stats[metric]["mean"]

    def se(self, metric: str) -> Optional[float]:
        return self.stats[metric]["se"]


@dataclass
class SweepResult:
    config: ExperimentConfig
    rows: list[ReplicateRow]
    failures: list[tuple[tuple, int, str]] = field(default_factory=list)

    @property
    def failed_cells(self) -> list[tuple]:
        return sorted({f[0] for f in self.failures}, key=self.config.cells().index)

    def summary(self) -> list[CellSummary]:
        return aggregate(self.rows)

    def cell_summary(self, case, b, alpha=None, nu=None) -> CellSummary:
        case = CaseKind.parse(case)
        alpha = self.config.alpha[0] if alpha is None else alpha
        nu = self.config.nu[0] if nu is None else nu
        for s in self.summary():
            if (s.case, s.b, s.alpha, s.nu) == (case, b, alpha, nu):
                return s
        raise KeyError((case, b, alpha, nu))


def run_sweep(config: ExperimentConfig, jobs: Optional[int] = None, progress: Optional[Callable] = None) -> SweepResult:
    config.validate()
    jobs = config.jobs if jobs is None else jobs
    if jobs <= 0:
        jobs = os.cpu_count() or 1
    tasks = [(config, cell, r) for cell in config.cells() for r in range(config.replicates)]
    rows, failures = [], []

    def collect(task, outcome):
        row, err = outcome
        if err is None:
            rows.append(row)
        else:
            log.error("cell %s replicate %d failed: %s", task[1], task[2], err)
            failures.append((task[1], task[2], err))
        if progress:
            progress(len(rows) + len(failures), len(tasks))

    if jobs == 1:
        for t in tasks:
            collect(t, _job(t))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for t, outcome in zip(tasks, pool.map(_job, tasks, chunksize=1)):
                collect(t, outcome)

    order = {cell: i for i, cell in enumerate(config.cells())}
    failed = {f[0] for f in failures}
    # a cell with any failed replicate is dropped as a whole
    rows = [r for r in rows if r.cell not in failed]
    rows.sort(key=lambda r: (order[r.cell], r.replicate))
    return SweepResult(config, rows, failures)


# ---------------------------------------------------------------------------
# aggregation


def _describe(values: Sequence[float]) -> dict[str, Optional[float]]:
    if not values:
        return {"mean": None, "se": None, "min": None, "max": None}
    a = np.asarray(values, dtype=np.float64)
    se = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0
    return {"mean": float(a.mean()), "se": se, "min": float(a.min()), "max": float(a.max())}


def aggregate(rows: Iterable[ReplicateRow]) -> list[CellSummary]:
    """Mean, standard error, min and max of every metric per cell, in first-seen order."""
    groups: dict[tuple, list[ReplicateRow]] = {}
    for r in rows:
        groups.setdefault(r.cell, []).append(r)
    out = []
    for cell, rs in groups.items():
        stats = {}
        for m in METRICS:
            vals = [getattr(r, m) for r in rs]
            stats[m] = _describe([v for v in vals if v is not None and not math.isnan(v)])
        out.append(CellSummary(*cell, rs[0].rho, len(rs), stats))
    return out


# ---------------------------------------------------------------------------
# persistence


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, CaseKind):
        return v.value
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_results_csv(rows: Iterable[ReplicateRow], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in RESULT_COLUMNS])


def _opt(v: str) -> Optional[float]:
    return None if v == "" else float(v)


def read_results_csv(path) -> list[ReplicateRow]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != RESULT_COLUMNS:
            raise ValueError(f"{path}: expected columns {RESULT_COLUMNS}, got {reader.fieldnames}")
        rows = []
        for rec in reader:
            rows.append(ReplicateRow(
                case=CaseKind.parse(rec["case"]), b=float(rec["b"]), alpha=float(rec["alpha"]),
                nu=float(rec["nu"]), rho=_opt(rec["rho"]), replicate=int(rec["replicate"]),
                seed=int(rec["seed"]), f_C=float(rec["f_C"]), mean_d=float(rec["mean_d"]),
                sigma_d=float(rec["sigma_d"]), gamma_1=_opt(rec["gamma_1"]), r_d=float(rec["r_d"]),
            ))
    return rows


SUMMARY_COLUMNS = ["case", "b", "alpha", "nu", "rho", "n"] + [
    f"{m}_{s}" for m in METRICS for s in ("mean", "se", "min", "max")
]


def write_summary_csv(summary: Iterable[CellSummary], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summary:
            row = [_fmt(s.case), _fmt(s.b), _fmt(s.alpha), _fmt(s.nu), _fmt(s.rho), str(s.n)]
            row += [_fmt(s.stats[m][k]) for m in METRICS for k in ("mean", "se", "min", "max")]
            w.writerow(row)


def write_manifest(config: ExperimentConfig, path, **extra) -> None:
    """Every config field in the same ``key = value`` format the config loader reads."""
    buf = io.StringIO()
    buf.write(f"# hawkesgame {__version__}\n")
    for k, v in extra.items():
        buf.write(f"# {k}: {v}\n")
    buf.write("\n".join(config.to_lines()) + "\n")
    Path(path).write_text(buf.getvalue())


def write_failures(failures, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["case", "b", "alpha", "nu", "replicate", "error"])
        for (case, b, alpha, nu), rep, err in failures:
            w.writerow([_fmt(CaseKind.parse(case)), _fmt(b), _fmt(alpha), _fmt(nu), rep, err])


def save_sweep(result: SweepResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(result.rows, out / "results.csv")
    write_manifest(result.config, out / "manifest.txt",
                   cells=len(result.config.cells()), failed_cells=len(result.failed_cells))
    if result.failures:
        write_failures(result.failures, out / "failures.csv")
    return out / "results.csv"


def stats_rows(stats: Sequence[GenerationStats]):
    for g, s in enumerate(stats):
        yield [str(g), _fmt(s.f_C), _fmt(s.mean_d), _fmt(s.sigma_d), _fmt(s.gamma_1), _fmt(s.r_d)]
