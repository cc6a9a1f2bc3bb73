"""Preset scenarios for the four figure families, each with a quick profile.

Quick profiles use smaller dimensions and a tenth of the trials (a tenth,
rounded, for the phi sweeps) so that they finish in minutes on one core.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Optional

import numpy as np

from .experiments import (ConvergenceStudy, Instance, Scenario, SweepResult, convergence_study, emit,
                          run_scenario, write_csv)

FIG1_RESCALED = [float(v) for v in np.linspace(2.0, 25.0, 12)]
FIG4_RESCALED = [float(v) for v in np.geomspace(10.0, 200.0, 8)]
SIGMA_W_GRID = [float(v) for v in np.linspace(0.1, 0.3, 5)]
RHO_GRID = [float(v) for v in np.linspace(0.05, 0.3, 6)]


def figure1_scenarios(quick: bool = False, master_seed: int = 0) -> list[Scenario]:
    p = [64, 128, 256] if quick else [128, 256, 512]
    trials = 10 if quick else 100
    common = dict(p=p, n_rule={"rescaled": FIG1_RESCALED}, k_rule="sqrt", trials=trials,
                  master_seed=master_seed, solver={"mode": "constrained"})
    return [
        Scenario(name="fig1_additive", design={"mode": "iid", "sigma_eps": 0.5},
                 corruption={"kind": "additive", "sigma_w": 0.2}, **common),
        Scenario(name="fig1_missing", design={"mode": "iid", "sigma_eps": 0.5},
                 corruption={"kind": "missing", "rho": 0.2}, **common),
        Scenario(name="fig1_var", design={"mode": "var", "A_norm": 0.2, "sigma_eps": 0.5},
                 corruption={"kind": "additive", "sigma_w": 0.2}, **common),
    ]


def figure2_instances(master_seed: int = 0) -> dict[str, Instance]:
    p, k = 128, 11
    n = int(math.ceil(15 * k * math.log(p)))
    return {
        "fig2_additive": Instance(p, k, n, {"kind": "additive", "sigma_w": 0.2}, seed=master_seed),
        "fig2_missing": Instance(p, k, n, {"kind": "missing", "rho": 0.2}, seed=master_seed + 1),
    }


def phi_scenario(kind: str, quick: bool = False, master_seed: int = 0) -> Scenario:
    trials = 20 if quick else 200
    common = dict(k_rule="log", trials=trials, master_seed=master_seed, design={"sigma_eps": 0.5},
                  solver={"mode": "constrained"}, axis="phi")
    if kind == "additive":
        return Scenario(name="fig3_additive", p=[256], n_rule={"phi_additive": 60},
                        corruption={"kind": "additive", "sigma_w": 0.2},
                        sweep={"param": "sigma_w", "values": SIGMA_W_GRID}, **common)
    if kind == "missing":
        return Scenario(name="fig3_missing", p=[128], n_rule={"phi_missing": 60},
                        corruption={"kind": "missing", "rho": 0.2},
                        sweep={"param": "rho", "values": RHO_GRID}, **common)
    raise ValueError(f"unknown kind {kind!r}")


def figure3_scenarios(quick: bool = False, master_seed: int = 0) -> list[Scenario]:
    return [phi_scenario("additive", quick, master_seed), phi_scenario("missing", quick, master_seed)]


def figure4_scenarios(quick: bool = False, master_seed: int = 0) -> list[Scenario]:
    if quick:
        families, p, trials = ["chain"], [32, 64], 10
        corruptions = {"missing": {"kind": "missing", "rho": 0.2}}
    else:
        families, p, trials = ["chain", "star", "erdos_renyi"], [32, 64, 128], 50
        corruptions = {"missing": {"kind": "missing", "rho": 0.2},
                       "additive": {"kind": "additive", "sigma_w": 0.2}}
    out = []
    for fam in families:
        for label, corr in corruptions.items():
            out.append(Scenario(name=f"fig4_{fam}_{label}", kind="graph", p=p,
                                n_rule={"rescaled": FIG4_RESCALED}, graph={"family": fam},
                                corruption=corr, trials=trials, master_seed=master_seed,
                                solver={"mode": "constrained"}, axis="graph"))
    return out


def figure_scenarios(number: int, quick: bool = False, master_seed: int = 0) -> list[Scenario]:
    if number == 1:
        return figure1_scenarios(quick, master_seed)
    if number == 3:
        return figure3_scenarios(quick, master_seed)
    if number == 4:
        return figure4_scenarios(quick, master_seed)
    raise ValueError(f"figure {number} has no sweep scenarios")


def emit_convergence(name: str, study: ConvergenceStudy, out_dir, formats=("csv", "svg")) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    if "csv" in formats:
        rows = [{"restart": t.restart, "iteration": i, "opt_error": float(o), "stat_error": float(s)}
                for t in study.traces for i, (o, s) in enumerate(zip(t.opt_error, t.stat_error))]
        paths.append(write_csv(out_dir / f"{name}_traces.csv", rows,
                               ["restart", "iteration", "opt_error", "stat_error"]))
        summary = [{"restart": t.restart, "gamma_hat": t.gamma_hat, "plateau_index": t.plateau_index,
                    "endpoint_to_ref": float(np.linalg.norm(t.endpoint - study.beta_ref)),
                    "stat_error": study.stat_error} for t in study.traces]
        paths.append(write_csv(out_dir / f"{name}_summary.csv", summary,
                               ["restart", "gamma_hat", "plateau_index", "endpoint_to_ref", "stat_error"]))
    if "svg" in formats:
        from .plotting import plot_convergence
        paths.append(plot_convergence(study, out_dir / f"{name}.svg", title=name))
    return paths


def run_figure(number: int, quick: bool = False, out_dir=None, master_seed: int = 0,
               formats=("csv", "svg"), workers: Optional[int] = None) -> tuple[bool, list]:
    """Run one figure preset; returns (all cells succeeded, results)."""
    if number == 2:
        studies = {name: convergence_study(inst) for name, inst in figure2_instances(master_seed).items()}
        if out_dir is not None:
            for name, st in studies.items():
                emit_convergence(name, st, out_dir, formats)
        return True, list(studies.values())
    results: list[SweepResult] = []
    for sc in figure_scenarios(number, quick, master_seed):
        res = run_scenario(sc, workers)
        results.append(res)
        if out_dir is not None:
            for fmt in formats:
                emit(res, fmt, out_dir)
    return all(r.ok for r in results), results
