"""Scenario-driven simulation sweeps.

A :class:`Scenario` describes a grid of cells (p, n, optional sweep value)
and a number of trials per cell.  Each trial gets its own integer seed
derived from ``(master_seed, cell, trial)``, so a sweep is reproducible
regardless of how many workers run it, and any single trial can be replayed
from its recorded seed.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .corruption import (CorruptedDataset, CorruptionModel, DesignSpec, apply_additive_noise, apply_missing,
                         generate_design, generate_response, generate_sparse_beta, var_driving_matrix)
from .graphical import GraphSpec, estimate_precision, generate_graph_precision
from .optimizer import SolverConfig, fit_contraction, random_feasible_start, solve
from .rng import trial_seed
from .surrogates import pair_for_dataset

log = logging.getLogger(__name__)

WORKERS_ENV = "NOISYLASSO_WORKERS"

RECORD_FIELDS = ["cell", "p", "n", "k", "sweep", "trial", "seed", "l2_error", "l1_error",
                 "iterations", "gamma_hat", "status", "message"]
AGGREGATE_FIELDS = ["cell", "p", "n", "k", "sweep", "count", "failed", "l2_mean", "l2_std", "l2_sem",
                    "l1_mean", "l1_std"]


# --------------------------------------------------------------------------- #
# Scenario
# --------------------------------------------------------------------------- #


def k_from_rule(rule, p: int) -> int:
    if rule == "sqrt":
        return math.ceil(math.sqrt(p))
    if rule == "log":
        return math.ceil(math.log(p))
    k = int(rule)
    if k < 1:
        raise ValueError("k must be positive")
    return k


@dataclass
class Scenario:
    """One simulation sweep.

    ``n_rule`` is one of ``{"values": [...]}``, ``{"rescaled": [...]}``
    (n = r k log p), ``{"phi_additive": c}`` (n = c (1 + s_w^2)^2 k log p) or
    ``{"phi_missing": c}`` (n = c / (1 - rho)^4 k log p).  ``sweep`` optionally
    varies ``sigma_w`` or ``rho`` across cells.
    """

    name: str
    p: list
    n_rule: dict
    k_rule: object = "sqrt"
    kind: str = "regression"
    design: dict = field(default_factory=dict)
    corruption: dict = field(default_factory=dict)
    sweep: Optional[dict] = None
    graph: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    trials: int = 1
    master_seed: int = 0
    outputs: list = field(default_factory=lambda: ["csv", "svg"])
    axis: str = "rescaled"

    def __post_init__(self):
        if self.kind not in ("regression", "graph"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if len(self.n_rule) != 1:
            raise ValueError("n_rule must have exactly one key")
        SolverConfig.from_dict(self.solver)
        for cell in self.cells():
            if cell["n"] < 1 or cell["k"] < 1:
                raise ValueError(f"cell {cell} has a nonpositive n or k")

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    def _k(self, p: int) -> int:
        if self.kind == "graph":
            return GraphSpec(self.graph.get("family", "chain"), p, self.graph.get("k")).degree
        return k_from_rule(self.k_rule, p)

    def _n_values(self, p: int, k: int, sweep_value) -> list[int]:
        (rule, arg), = self.n_rule.items()
        klogp = k * math.log(p)
        if rule == "values":
            return [int(v) for v in arg]
        if rule == "rescaled":
            return [int(math.ceil(r * klogp)) for r in arg]
        if rule == "phi_additive":
            sw = sweep_value if sweep_value is not None else self.corruption.get("sigma_w", 0.0)
            return [int(math.ceil(arg * (1 + sw ** 2) ** 2 * klogp))]
        if rule == "phi_missing":
            rho = sweep_value if sweep_value is not None else self.corruption.get("rho", 0.0)
            return [int(math.ceil(arg / (1 - rho) ** 4 * klogp))]
        raise ValueError(f"unknown n rule {rule!r}")

    def cells(self) -> list[dict]:
        sweep_values = self.sweep["values"] if self.sweep else [None]
        out = []
        for p, sv in itertools.product(self.p, sweep_values):
            k = self._k(p)
            for n in self._n_values(p, k, sv):
                out.append({"cell": len(out), "p": int(p), "n": n, "k": k, "sweep": sv})
        return out


# --------------------------------------------------------------------------- #
# Trials
# --------------------------------------------------------------------------- #


def _corruption_params(scenario: Scenario, cell: dict) -> dict:
    c = dict(scenario.corruption)
    if scenario.sweep and cell["sweep"] is not None:
        c[scenario.sweep["param"]] = cell["sweep"]
    return c


def _corrupt(X, y, corr: dict, ss_corrupt, ss_extra):
    kind = corr.get("kind", "none")
    n, p = X.shape
    estimated = bool(corr.get("estimated", False))
    if kind == "none":
        return CorruptedDataset(X, y, CorruptionModel("none")), None
    if kind == "additive":
        sw = float(corr["sigma_w"])
        Z = apply_additive_noise(X, sw ** 2, ss_corrupt)
        W0 = None
        if estimated:
            W0 = apply_additive_noise(np.zeros((n, p)), sw ** 2, ss_extra)
        model = CorruptionModel("additive", cov_w=None if estimated else sw ** 2 * np.eye(p), estimated=estimated)
        return CorruptedDataset(Z, y, model), W0
    if kind == "missing":
        rho = float(corr["rho"])
        Z, mask = apply_missing(X, rho, ss_corrupt)
        model = CorruptionModel("missing", rho=None if estimated else np.full(p, rho), estimated=estimated)
        return CorruptedDataset(Z, y, model, mask=mask), None
    raise ValueError(f"unsupported corruption kind {kind!r}")


def _regression_trial(scenario: Scenario, cell: dict, seed: int) -> dict:
    p, n, k = cell["p"], cell["n"], cell["k"]
    d = scenario.design
    ss = np.random.SeedSequence(seed).spawn(6)
    sigma_eps = float(d.get("sigma_eps", 0.5))
    truth = generate_sparse_beta(p, k, float(d.get("beta_norm", 1.0)), ss[0], sigma_eps=sigma_eps)
    if d.get("mode", "iid") == "var":
        A = var_driving_matrix(p, float(d.get("A_norm", 0.2)), ss[1])
        design = DesignSpec.var(n, A, np.eye(p))
    else:
        design = DesignSpec(n=n, p=p, cov=np.eye(p))
    X = generate_design(design, ss[2])
    y = generate_response(X, truth.beta_star, sigma_eps, ss[3])
    data, W0 = _corrupt(X, y, _corruption_params(scenario, cell), ss[4], ss[5])
    pair = pair_for_dataset(data, W0=W0)
    cfg = SolverConfig.from_dict(scenario.solver)
    spec = cfg.problem(pair, beta_ref=truth.beta_star, k=k, cov_x=design.cov)
    beta_hat, trace = solve(spec, tol=cfg.tol, max_iter=cfg.max_iter, store_iterates=True)
    err = beta_hat - truth.beta_star
    gamma = math.nan
    dists = np.linalg.norm(trace.iterates - beta_hat, axis=1)
    try:
        gamma, _ = fit_contraction(dists)
    except ValueError:
        pass
    return {"l2_error": float(np.linalg.norm(err)), "l1_error": float(np.abs(err).sum()),
            "iterations": trace.iterations_run, "gamma_hat": gamma}


def _graph_trial(scenario: Scenario, cell: dict, seed: int) -> dict:
    p, n = cell["p"], cell["n"]
    g = scenario.graph
    ss = np.random.SeedSequence(seed).spawn(6)
    spec = GraphSpec(g.get("family", "chain"), p, g.get("k"), g.get("edge_weight"))
    Theta = generate_graph_precision(spec, ss[0])
    Sigma = np.linalg.inv(Theta)
    Sigma = 0.5 * (Sigma + Sigma.T)
    X = generate_design(DesignSpec(n=n, p=p, cov=Sigma), ss[2])
    data, _ = _corrupt(X, np.zeros(n), _corruption_params(scenario, cell), ss[4], ss[5])
    cfg = SolverConfig.from_dict(scenario.solver)
    est = estimate_precision(data.Z, data.model, data.mask, cfg, theta_true=Theta,
                             symmetrize=g.get("symmetrize", "lp"), lp_solver=g.get("lp_solver", "auto"))
    D = est.theta_hat - Theta
    return {"l2_error": float(np.linalg.norm(D, 2)), "l1_error": float(np.abs(D).sum(axis=0).max()),
            "iterations": 0, "gamma_hat": math.nan}


def run_trial(scenario: Scenario, cell: dict, seed: int) -> dict:
    """Run one trial; solver failures are captured in the record, not raised."""
    rec = {f: cell[f] for f in ("cell", "p", "n", "k", "sweep")}
    rec["seed"] = seed
    try:
        fn = _regression_trial if scenario.kind == "regression" else _graph_trial
        rec.update(fn(scenario, cell, seed))
        rec["status"], rec["message"] = "ok", ""
    except Exception as exc:  # noqa: BLE001 - cell failures are data
        log.warning("cell %s seed %s failed: %s", cell["cell"], seed, exc)
        rec.update({"l2_error": math.nan, "l1_error": math.nan, "iterations": 0, "gamma_hat": math.nan,
                    "status": "failed", "message": f"{type(exc).__name__}: {exc}"})
    return rec


def _task(args):
    scenario_dict, cell, trial, seed = args
    rec = run_trial(Scenario.from_dict(scenario_dict), cell, seed)
    rec["trial"] = trial
    return rec


@dataclass
class SweepResult:
    scenario: Scenario
    records: list
    aggregates: list

    @property
    def ok(self) -> bool:
        return all(r["status"] == "ok" for r in self.records)


def aggregate(records: list) -> list[dict]:
    by_cell: dict[int, list] = {}
    for r in records:
        by_cell.setdefault(int(r["cell"]), []).append(r)
    out = []
    for c in sorted(by_cell):
        rs = by_cell[c]
        good = [r for r in rs if r["status"] == "ok"]
        l2 = np.array([r["l2_error"] for r in good], dtype=float)
        l1 = np.array([r["l1_error"] for r in good], dtype=float)
        m = len(good)
        first = rs[0]
        out.append({
            "cell": c, "p": first["p"], "n": first["n"], "k": first["k"], "sweep": first["sweep"],
            "count": m, "failed": len(rs) - m,
            "l2_mean": float(l2.mean()) if m else math.nan,
            "l2_std": float(l2.std(ddof=1)) if m > 1 else 0.0,
            "l2_sem": float(l2.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0,
            "l1_mean": float(l1.mean()) if m else math.nan,
            "l1_std": float(l1.std(ddof=1)) if m > 1 else 0.0,
        })
    return out


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_scenario(scenario: Scenario, workers: Optional[int] = None) -> SweepResult:
    """Run every (cell, trial) of the scenario; output order is (cell, trial)."""
    workers = workers or worker_count()
    cells = scenario.cells()
    tasks = [(scenario.to_dict(), cell, t, trial_seed(scenario.master_seed, cell["cell"], t))
             for cell in cells for t in range(scenario.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_task, tasks, chunksize=1))
    else:
        records = [_task(t) for t in tasks]
    records.sort(key=lambda r: (r["cell"], r["trial"]))
    records = [{f: r[f] for f in RECORD_FIELDS} for r in records]
    return SweepResult(scenario, records, aggregate(records))


def replay(scenario: Scenario, cell_index: int, seed: int) -> dict:
    """Re-run a single trial in isolation from its recorded seed."""
    cells = scenario.cells()
    if not 0 <= cell_index < len(cells):
        raise ValueError(f"cell {cell_index} out of range (scenario has {len(cells)})")
    return run_trial(scenario, cells[cell_index], seed)


# --------------------------------------------------------------------------- #
# Rescaling and summary metrics
# --------------------------------------------------------------------------- #


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    yerr: np.ndarray


def rescale_axis(rows: list, mode: str = "rescaled", group: str = "p") -> list[Series]:
    """Turn aggregate rows into one series per ``group`` value.

    raw: x = n.  rescaled: x = n / (k log p) (natural log).  graph: rescaled x
    and y divided by sqrt(k).
    """
    if not rows:
        raise ValueError("no records to rescale")
    if mode not in ("raw", "rescaled", "graph"):
        raise ValueError(f"unknown axis mode {mode!r}")
    groups: dict = {}
    for r in rows:
        groups.setdefault(r[group], []).append(r)
    out = []
    for key in sorted(groups):
        rs = sorted(groups[key], key=lambda r: r["n"])
        n = np.array([r["n"] for r in rs], dtype=float)
        k = np.array([r["k"] for r in rs], dtype=float)
        p = np.array([r["p"] for r in rs], dtype=float)
        y = np.array([r["l2_mean"] for r in rs], dtype=float)
        yerr = np.array([r.get("l2_sem", 0.0) for r in rs], dtype=float)
        x = n if mode == "raw" else n / (k * np.log(p))
        if mode == "graph":
            y, yerr = y / np.sqrt(k), yerr / np.sqrt(k)
        out.append(Series(f"{group}={key}", x, y, yerr))
    return out


def stacking_spread(series: list[Series], x_min: Optional[float] = None, grid: int = 64) -> float:
    """Max over a common x-grid of (max - min) / min across linearly interpolated curves.

    The grid covers the x-range shared by all curves, clipped below at ``x_min``.
    """
    lo = max(s.x.min() for s in series)
    hi = min(s.x.max() for s in series)
    if x_min is not None:
        lo = max(lo, x_min)
    if not hi > lo:
        raise ValueError("curves do not overlap on the requested range")
    xs = np.linspace(lo, hi, grid)
    Y = np.array([np.interp(xs, s.x, s.y) for s in series])
    return float(((Y.max(axis=0) - Y.min(axis=0)) / Y.min(axis=0)).max())


def rescale_phi_error(error, kind: str, value, sigma_eps: float = 0.5):
    """Divide out the predicted dependence on sigma_w (additive) or rho (missing)."""
    error = np.asarray(error, dtype=float)
    value = np.asarray(value, dtype=float)
    if kind == "additive":
        return np.sqrt(1 + value ** 2) / (value + sigma_eps) * error
    if kind == "missing":
        return error / (1 + sigma_eps * (1 - value))
    raise ValueError(f"unknown kind {kind!r}")


def phi_series(result: SweepResult) -> Series:
    """Rescaled-error curve of a sigma_w / rho sweep, with standard-error bars."""
    sc = result.scenario
    kind = "additive" if sc.sweep["param"] == "sigma_w" else "missing"
    se = float(sc.design.get("sigma_eps", 0.5))
    rows = sorted(result.aggregates, key=lambda r: r["sweep"])
    v = np.array([r["sweep"] for r in rows], dtype=float)
    y = rescale_phi_error([r["l2_mean"] for r in rows], kind, v, se)
    e = rescale_phi_error([r["l2_sem"] for r in rows], kind, v, se)
    return Series(kind, v, y, e)


def phi_scaling_curves(kind: str, quick: bool = False, master_seed: int = 0,
                       workers: Optional[int] = None) -> tuple[SweepResult, Series]:
    from .figures import phi_scenario
    res = run_scenario(phi_scenario(kind, quick, master_seed), workers)
    return res, phi_series(res)


# --------------------------------------------------------------------------- #
# Convergence study
# --------------------------------------------------------------------------- #


@dataclass
class RestartTrace:
    restart: int
    opt_error: np.ndarray
    stat_error: np.ndarray
    endpoint: np.ndarray
    gamma_hat: float
    plateau_index: int


@dataclass
class ConvergenceStudy:
    beta_star: np.ndarray
    beta_ref: np.ndarray
    stat_error: float
    traces: list

    def pairwise_endpoint_distance(self) -> float:
        E = np.array([t.endpoint for t in self.traces])
        D = np.linalg.norm(E[:, None, :] - E[None, :, :], axis=2)
        return float(D.max())


@dataclass(frozen=True)
class Instance:
    """One regression problem for a convergence study."""

    p: int
    k: int
    n: int
    corruption: dict
    sigma_eps: float = 0.5
    seed: int = 0
    solver: dict = field(default_factory=dict)


def convergence_study(instance: Instance, restarts: int = 10) -> ConvergenceStudy:
    """Solve from beta0 = 0 (the reference run), then from ``restarts`` random feasible starts."""
    sc = Scenario(name="convergence", p=[instance.p], n_rule={"values": [instance.n]}, k_rule=instance.k,
                  corruption=instance.corruption, design={"sigma_eps": instance.sigma_eps}, solver=instance.solver)
    ss = np.random.SeedSequence(instance.seed).spawn(7)
    p, n, k = instance.p, instance.n, instance.k
    truth = generate_sparse_beta(p, k, 1.0, ss[0], sigma_eps=instance.sigma_eps)
    X = generate_design(DesignSpec(n=n, p=p, cov=np.eye(p)), ss[2])
    y = generate_response(X, truth.beta_star, instance.sigma_eps, ss[3])
    data, W0 = _corrupt(X, y, sc.corruption, ss[4], ss[5])
    pair = pair_for_dataset(data, W0=W0)
    cfg = SolverConfig.from_dict(sc.solver)
    spec = cfg.problem(pair, beta_ref=truth.beta_star, k=k)
    beta_ref, _ = solve(spec, tol=cfg.tol, max_iter=cfg.max_iter)
    starts = [np.zeros(p)] + [random_feasible_start(p, spec.R, s) for s in ss[6].spawn(restarts)]
    traces = []
    for i, b0 in enumerate(starts):
        _, tr = solve(spec, beta0=b0, tol=cfg.tol, max_iter=cfg.max_iter, store_iterates=True)
        opt = np.linalg.norm(tr.iterates - beta_ref, axis=1)
        stat = np.linalg.norm(tr.iterates - truth.beta_star, axis=1)
        try:
            gamma, T = fit_contraction(opt)
        except ValueError:
            gamma, T = math.nan, 0
        traces.append(RestartTrace(i, opt, stat, tr.iterates[-1], gamma, T))
    return ConvergenceStudy(truth.beta_star, beta_ref, float(np.linalg.norm(beta_ref - truth.beta_star)), traces)


# --------------------------------------------------------------------------- #
# CSV emission
# --------------------------------------------------------------------------- #


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, rows: list, fields: list) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r.get(f)) for f in fields])
    return path


_INT_FIELDS = {"cell", "p", "n", "k", "trial", "seed", "iterations", "count", "failed"}
_STR_FIELDS = {"status", "message"}


def read_csv(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {}
            for key, v in r.items():
                if key in _STR_FIELDS:
                    row[key] = v
                elif v == "":
                    row[key] = None
                elif key in _INT_FIELDS:
                    row[key] = int(v)
                else:
                    row[key] = float(v)
            out.append(row)
    return out


def emit(result: SweepResult, fmt: str, out_dir) -> list[Path]:
    """Write ``<name>_records.csv`` / ``<name>_aggregates.csv`` or SVG panels."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir} is not writable")
    name = result.scenario.name
    if fmt == "csv":
        paths = [write_csv(out_dir / f"{name}_records.csv", result.records, RECORD_FIELDS),
                 write_csv(out_dir / f"{name}_aggregates.csv", result.aggregates, AGGREGATE_FIELDS)]
        meta = out_dir / f"{name}_scenario.json"
        meta.write_text(json.dumps(result.scenario.to_dict(), indent=2, sort_keys=True))
        return paths + [meta]
    if fmt == "svg":
        from .plotting import plot_sweep
        return plot_sweep(result, out_dir)
    raise ValueError(f"unknown format {fmt!r}")


def load_result(out_dir, name: str) -> SweepResult:
    out_dir = Path(out_dir)
    scenario = Scenario.from_dict(json.loads((out_dir / f"{name}_scenario.json").read_text()))
    records = read_csv(out_dir / f"{name}_records.csv")
    return SweepResult(scenario, records, aggregate(records))
