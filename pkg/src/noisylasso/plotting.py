"""SVG line plots of sweep results and convergence traces (matplotlib, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ConvergenceStudy, SweepResult, phi_series, rescale_axis  # noqa: E402

# fixed hash salt and no date stamp keep the SVG text reproducible
plt.rcParams["svg.hashsalt"] = "noisylasso"
plt.rcParams["svg.fonttype"] = "path"
_META = {"Date": None, "Creator": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_series(series, path, xlabel: str, ylabel: str, title: str = "", logx: bool = False,
                logy: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    for s in series:
        ax.errorbar(s.x, s.y, yerr=s.yerr, marker="o", ms=3, capsize=2, label=s.label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_sweep(result: SweepResult, out_dir) -> list[Path]:
    """One SVG per panel: raw and rescaled axes, or the rescaled-error curve of a sweep."""
    out_dir = Path(out_dir)
    sc = result.scenario
    rows = [r for r in result.aggregates if r["count"] > 0]
    if not rows:
        return []
    if sc.sweep:
        s = phi_series(SweepResult(sc, result.records, rows))
        xlabel = "sigma_w" if sc.sweep["param"] == "sigma_w" else "rho"
        return [plot_series([s], out_dir / f"{sc.name}.svg", xlabel, "rescaled l2 error", sc.name)]
    graph = sc.kind == "graph"
    ylabel = "op-norm error / sqrt(k)" if graph else "l2 error"
    raw = rescale_axis(rows, "raw")
    if graph:
        raw = rescale_axis(rows, "graph")
        for s, r in zip(raw, rescale_axis(rows, "raw")):
            s.x = r.x
    resc = rescale_axis(rows, "graph" if graph else "rescaled")
    return [
        plot_series(raw, out_dir / f"{sc.name}_raw.svg", "n", ylabel, sc.name),
        plot_series(resc, out_dir / f"{sc.name}_rescaled.svg", "n / (k log p)", ylabel, sc.name),
    ]


def plot_convergence(study: ConvergenceStudy, path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    for i, t in enumerate(study.traces):
        it = range(len(t.opt_error))
        mask = t.opt_error > 0
        ax.plot([j for j, m in zip(it, mask) if m], t.opt_error[mask], color="tab:blue", lw=0.8,
                label="optimization error" if i == 0 else None)
        ax.plot(it, t.stat_error, color="tab:red", lw=0.8, ls="--",
                label="statistical error" if i == 0 else None)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("l2 distance")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, Path(path))
