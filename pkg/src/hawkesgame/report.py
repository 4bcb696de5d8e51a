"""Figure data (gnuplot-style columnar text) and matplotlib renderings.

Every ``.dat`` file holds one block per plotted line, blocks separated by two
blank lines so ``gnuplot`` can address them with ``index``. Each block starts
with a ``#`` header naming the line and its columns.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import CellSummary  # noqa: E402
from .metrics import GenerationStats  # noqa: E402
from .point_process import CaseKind  # noqa: E402

CASE_STYLE = {
    CaseKind.STANDARD: dict(color="0.3", ls="--", marker="x", label="standard"),
    CaseKind.POISSON: dict(color="0.55", ls="-", marker="^", label="Poisson"),
    CaseKind.ENDO: dict(color="tab:red", ls="-", marker="o", label="Endo"),
    CaseKind.EXO: dict(color="tab:blue", ls="-", marker="s", label="Exo"),
}
INDEX_LABELS = {
    "f_C": r"$f_C$",
    "mean_d": r"$\bar d$",
    "sigma_d": r"$\sigma_d$",
    "gamma_1": r"$\gamma_1$",
    "r_d": r"$r_d$",
}
INDICES = ["mean_d", "sigma_d", "gamma_1", "r_d"]


def set_style():
    plt.rcParams.update({
        "font.size": 9,
        "axes.labelsize": 10,
        "legend.fontsize": 7,
        "xtick.labelsize": 8,
        "ytick.labelsize": 8,
        "lines.markersize": 4,
        "lines.linewidth": 1.2,
        "figure.dpi": 120,
        "savefig.bbox": "tight",
    })


def _num(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return "NaN"
    return f"{v:.10g}"


def _ref(values: Sequence[float], preferred: float) -> float:
    return preferred if preferred in values else sorted(values)[len(values) // 2]


def _write_blocks(path: Path, blocks: list[tuple[str, list[str], list[list]]]) -> None:
    chunks = []
    for title, cols, rows in blocks:
        lines = [f"# {title}", "# " + " ".join(cols)]
        lines += [" ".join(_num(v) if not isinstance(v, str) else v for v in r) for r in rows]
        chunks.append("\n".join(lines))
    path.write_text("\n\n\n".join(chunks) + "\n")


def _fc_lines(summary: Sequence[CellSummary]):
    lines: dict[tuple, list[CellSummary]] = {}
    for s in summary:
        lines.setdefault((s.case, s.alpha, s.nu), []).append(s)
    return {k: sorted(v, key=lambda s: s.b) for k, v in lines.items()}


def _index_lines(summary: Sequence[CellSummary], along: str):
    """Lines of index-vs-param at the smallest b, the other param at its reference value."""
    if not summary:
        return {}, float("nan"), "nu", float("nan")
    b0 = min(s.b for s in summary)
    other = "nu" if along == "alpha" else "alpha"
    other_vals = sorted({getattr(s, other) for s in summary})
    ref = _ref(other_vals, 1.0 if other == "nu" else 0.5)
    lines: dict[CaseKind, list[CellSummary]] = {}
    for s in summary:
        if s.b == b0 and getattr(s, other) == ref:
            lines.setdefault(s.case, []).append(s)
    return {c: sorted(v, key=lambda s: getattr(s, along)) for c, v in lines.items()}, b0, other, ref


def write_figure_data(summary: Sequence[CellSummary], out_dir) -> list[Path]:
    out = Path(out_dir)
    written = []

    blocks = []
    for (case, alpha, nu), cells in _fc_lines(summary).items():
        rows = [[s.b, s.mean("f_C"), s.se("f_C")] for s in cells]
        blocks.append((f"case={case.value} alpha={alpha:g} nu={nu:g}", ["b", "f_C_mean", "f_C_se"], rows))
    _write_blocks(out / "fc_vs_b.dat", blocks)
    written.append(out / "fc_vs_b.dat")

    cols = [c for m in INDICES for c in (f"{m}_mean", f"{m}_se")]
    for along in ("alpha", "nu"):
        blocks = []
        for case in CaseKind:
            for (b, other_val), cells in _group(summary, case, along).items():
                other = "nu" if along == "alpha" else "alpha"
                rows = [[getattr(s, along)] + [v for m in INDICES for v in (s.mean(m), s.se(m))] for s in cells]
                blocks.append((f"case={case.value} b={b:g} {other}={other_val:g}", [along] + cols, rows))
        path = out / f"indices_vs_{along}.dat"
        _write_blocks(path, blocks)
        written.append(path)

    blocks = []
    for b in sorted({s.b for s in summary}):
        rows = [[s.case.value, s.alpha, s.nu, s.mean("sigma_d"), s.mean("gamma_1"), s.mean("r_d"), s.mean("f_C")]
                for s in summary if s.b == b]
        blocks.append((f"b={b:g}", ["case", "alpha", "nu", "sigma_d", "gamma_1", "r_d", "f_C"], rows))
    _write_blocks(out / "scatter.dat", blocks)
    written.append(out / "scatter.dat")
    return written


def _group(summary, case, along):
    other = "nu" if along == "alpha" else "alpha"
    groups: dict[tuple, list[CellSummary]] = {}
    for s in summary:
        if s.case == case:
            groups.setdefault((s.b, getattr(s, other)), []).append(s)
    return {k: sorted(v, key=lambda s: getattr(s, along)) for k, v in groups.items()}


def plot_fc_vs_b(summary: Sequence[CellSummary], path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    lines = _fc_lines(summary)
    multi = len({(a, n) for (_, a, n) in lines}) > 1
    for (case, alpha, nu), cells in lines.items():
        style = dict(CASE_STYLE[case])
        if multi and case.uses_hawkes and case is not CaseKind.POISSON:
            style["label"] = f"{style['label']} α={alpha:g} ν={nu:g}"
            style["alpha"] = 0.35 + 0.65 * alpha
        b = [s.b for s in cells]
        ax.errorbar(b, [s.mean("f_C") for s in cells], yerr=[s.se("f_C") for s in cells], capsize=1.5, **style)
    ax.set_xlabel(r"$b$")
    ax.set_ylabel(INDEX_LABELS["f_C"])
    ax.set_ylim(-0.02, 1.02)
    _dedupe_legend(ax)
    fig.savefig(path)
    plt.close(fig)


def plot_indices(summary: Sequence[CellSummary], along: str, path) -> None:
    lines, b0, other, ref = _index_lines(summary, along)
    fig, axes = plt.subplots(1, len(INDICES), figsize=(10, 2.6))
    for ax, m in zip(axes, INDICES):
        for case, cells in lines.items():
            x = [getattr(s, along) for s in cells]
            y = [np.nan if s.mean(m) is None else s.mean(m) for s in cells]
            ax.plot(x, y, **CASE_STYLE[case])
        ax.set_xlabel(r"$\alpha$" if along == "alpha" else r"$\nu$")
        ax.set_ylabel(INDEX_LABELS[m])
    axes[0].legend()
    other_sym = r"\nu" if other == "nu" else r"\alpha"
    fig.suptitle(rf"$b={b0:g}$, ${other_sym}={ref:g}$", fontsize=9)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_scatter(summary: Sequence[CellSummary], path) -> None:
    bs = sorted({s.b for s in summary})
    xs = ["sigma_d", "gamma_1", "r_d"]
    fig, axes = plt.subplots(len(bs), len(xs), figsize=(8, 2.3 * len(bs)), squeeze=False)
    for row, b in zip(axes, bs):
        for ax, m in zip(row, xs):
            for case in CaseKind:
                pts = [(s.mean(m), s.mean("f_C")) for s in summary
                       if s.b == b and s.case == case and s.mean(m) is not None]
                if pts:
                    st = CASE_STYLE[case]
                    x, y = zip(*pts)
                    ax.scatter(x, y, s=10, color=st["color"], marker=st["marker"], label=st["label"])
            ax.set_xlabel(INDEX_LABELS[m])
            ax.set_ylabel(INDEX_LABELS["f_C"])
            ax.set_title(rf"$b={b:g}$", fontsize=8)
    axes[0][0].legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_timeseries(stats: Sequence[GenerationStats], path, title: str = "") -> None:
    g = np.arange(len(stats))
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(5, 4), sharex=True)
    ax1.plot(g, [s.f_C for s in stats], color="k", lw=0.8)
    ax1.set_ylabel(INDEX_LABELS["f_C"])
    ax1.set_ylim(-0.02, 1.02)
    ax2.plot(g, [s.sigma_d for s in stats], lw=0.8, label=INDEX_LABELS["sigma_d"])
    ax2.plot(g, [s.r_d for s in stats], lw=0.8, label=INDEX_LABELS["r_d"])
    ax2.set_xlabel("generation")
    ax2.legend()
    if title:
        ax1.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_trace(grid_t: np.ndarray, lam: np.ndarray, own_events: Iterable[float], path, rho: Optional[float] = None):
    fig, ax = plt.subplots(figsize=(5, 2.6))
    ax.plot(grid_t, lam, color="k", lw=1)
    ev = np.asarray(list(own_events))
    ax.plot(ev, np.zeros_like(ev), "o", color="k", ms=4, clip_on=False)
    if rho is not None:
        ax.axhline(rho, color="0.6", ls=":", lw=0.8)
    ax.set_xlabel(r"$t$")
    ax.set_ylabel(r"$\lambda(t)$")
    ax.set_ylim(bottom=0)
    fig.savefig(path)
    plt.close(fig)


def _dedupe_legend(ax):
    handles, labels = ax.get_legend_handles_labels()
    seen = {}
    for h, l in zip(handles, labels):
        seen.setdefault(l, h)
    ax.legend(seen.values(), seen.keys())


def render_figures(summary: Sequence[CellSummary], out_dir) -> list[Path]:
    set_style()
    out = Path(out_dir)
    paths = [out / "fc_vs_b.png", out / "indices_vs_alpha.png", out / "indices_vs_nu.png", out / "scatter.png"]
    plot_fc_vs_b(summary, paths[0])
    plot_indices(summary, "alpha", paths[1])
    plot_indices(summary, "nu", paths[2])
    plot_scatter(summary, paths[3])
    return paths
