"""Projected and composite gradient descent for l1-constrained quadratics.

Both solvers minimise

    0.5 * b' G b - <g, b> + lam * ||b||_1     subject to ||b||_1 <= R

for a symmetric, possibly indefinite G.  ``lam = 0`` is the constrained
program; ``lam > 0`` with ``R = b0 * sqrt(k)`` is the side-constrained
Lagrangian program.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .rng import make_rng
from .surrogates import SurrogatePair

FEAS_TOL = 1e-9


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    # entries with |v| == t map to exactly 0
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_l1(v, R: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto {x : ||x||_1 <= R} (sort-based, exact)."""
    if not R > 0:
        raise ValueError("radius R must be positive")
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    if a.sum() <= R:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    last = np.flatnonzero(u * j > css - R)[-1]
    theta = (css[last] - R) / (last + 1)
    return soft_threshold(v, theta)


def prox_l1_in_ball(v, lam_over_eta: float, R: float) -> np.ndarray:
    """argmin_{||x||_1 <= R} 0.5 ||x - v||^2 + lam_over_eta * ||x||_1.

    The solution is a soft threshold at lam_over_eta + theta*, theta* >= 0;
    since soft thresholds compose additively, the shift theta* is exactly the
    one found by projecting the plain soft threshold onto the ball.
    """
    if not R > 0:
        raise ValueError("radius R must be positive")
    if lam_over_eta < 0:
        raise ValueError("lam_over_eta must be nonnegative")
    v = np.asarray(v, dtype=float)
    if lam_over_eta == 0:
        return project_l1(v, R)
    w = soft_threshold(v, lam_over_eta)
    if np.abs(w).sum() <= R:
        return w
    return project_l1(w, R)


# --------------------------------------------------------------------------- #
# Problem / trace types
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ProblemSpec:
    pair: SurrogatePair
    eta: float
    R: float
    lam: float = 0.0
    mode: str = "constrained"

    def __post_init__(self):
        if self.mode not in ("constrained", "lagrangian"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.R > 0:
            raise ValueError("radius must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.mode == "constrained" and self.lam != 0:
            raise ValueError("constrained mode has no l1 penalty")
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @classmethod
    def constrained(cls, pair: SurrogatePair, R: float, eta: float) -> "ProblemSpec":
        return cls(pair=pair, eta=eta, R=R, lam=0.0, mode="constrained")

    @classmethod
    def lagrangian(cls, pair: SurrogatePair, lam: float, b0: float, k: int, eta: float) -> "ProblemSpec":
        return cls(pair=pair, eta=eta, R=b0 * math.sqrt(k), lam=lam, mode="lagrangian")

    def objective(self, beta: np.ndarray) -> float:
        return self.pair.loss(beta) + self.lam * float(np.abs(beta).sum())


@dataclass
class OptimizerTrace:
    objective_values: np.ndarray
    dist_to_reference: Optional[np.ndarray]
    iterations_run: int
    converged: bool
    iterates: Optional[np.ndarray] = None
    gamma_hat: Optional[float] = None
    plateau_index: Optional[int] = None
    extra: dict = field(default_factory=dict)


def write_trace_csv(trace: OptimizerTrace, path) -> Path:
    """One row per recorded iterate: iteration, objective, dist_to_ref (blank without a reference)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective", "dist_to_ref"])
        d = trace.dist_to_reference
        for t, obj in enumerate(trace.objective_values):
            w.writerow([t, repr(float(obj)), "" if d is None else repr(float(d[t]))])
    return path


def _run(spec: ProblemSpec, beta0, max_iter: int, tol: float, reference, store_iterates: bool):
    G, g = spec.pair.gamma_mat, spec.pair.gamma_vec
    p = g.size
    beta = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    if beta.shape != (p,):
        raise ValueError("beta0 has the wrong dimension")
    if np.abs(beta).sum() > spec.R:
        beta = project_l1(beta, spec.R)
    step_map = (lambda v: project_l1(v, spec.R)) if spec.mode == "constrained" else (
        lambda v: prox_l1_in_ball(v, spec.lam / spec.eta, spec.R))
    ref = None if reference is None else np.asarray(reference, dtype=float)

    objs = [spec.objective(beta)]
    dists = [] if ref is None else [float(np.linalg.norm(beta - ref))]
    iterates = [beta.copy()] if store_iterates else None
    converged = False
    t = 0
    for t in range(1, max_iter + 1):
        grad = G @ beta - g
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError("non-finite gradient; inputs are badly scaled")
        new = step_map(beta - grad / spec.eta)
        change = float(np.linalg.norm(new - beta))
        scale = max(1.0, float(np.linalg.norm(beta)))
        beta = new
        objs.append(spec.objective(beta))
        if ref is not None:
            dists.append(float(np.linalg.norm(beta - ref)))
        if store_iterates:
            iterates.append(beta.copy())
        if change <= tol * scale:
            converged = True
            break
    trace = OptimizerTrace(
        objective_values=np.array(objs),
        dist_to_reference=None if ref is None else np.array(dists),
        iterations_run=t,
        converged=converged,
        iterates=None if iterates is None else np.array(iterates),
    )
    return beta, trace


def pgd_constrained(spec: ProblemSpec, beta0=None, max_iter: int = 10_000, tol: float = 1e-9,
                    reference=None, store_iterates: bool = False):
    """Projected gradient descent b <- Proj_R(b - (G b - g) / eta)."""
    if spec.mode != "constrained":
        raise ValueError("pgd_constrained needs a constrained ProblemSpec")
    return _run(spec, beta0, max_iter, tol, reference, store_iterates)


def pgd_lagrangian(spec: ProblemSpec, beta0=None, max_iter: int = 10_000, tol: float = 1e-9,
                   reference=None, store_iterates: bool = False):
    """Composite gradient descent: prox of lam*||.||_1 restricted to the side-constraint ball."""
    if spec.mode != "lagrangian":
        raise ValueError("pgd_lagrangian needs a lagrangian ProblemSpec")
    return _run(spec, beta0, max_iter, tol, reference, store_iterates)


def solve(spec: ProblemSpec, **kw):
    if spec.mode == "constrained":
        return pgd_constrained(spec, **kw)
    return pgd_lagrangian(spec, **kw)


def random_feasible_start(p: int, R: float, seed=None) -> np.ndarray:
    """Random point of the l1 ball with norm between R/2 and R."""
    rng = make_rng(seed)
    d = rng.standard_normal(p)
    return d / np.abs(d).sum() * R * rng.uniform(0.5, 1.0)


# --------------------------------------------------------------------------- #
# Step size
# --------------------------------------------------------------------------- #


def power_iteration(M: np.ndarray, max_iter: int = 200, tol: float = 1e-8, seed: int = 0) -> float:
    """Estimate the spectral norm of a symmetric matrix from ||M v|| along power iterates."""
    M = np.asarray(M, dtype=float)
    v = make_rng(seed).standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = M @ v
        new = float(np.linalg.norm(w))
        if new == 0.0:
            raise ValueError("matrix annihilates the probe vector (zero matrix?)")
        v = w / new
        if abs(new - est) <= tol * new:
            return new
        est = new
    raise RuntimeError(f"power iteration did not converge in {max_iter} iterations")


def choose_eta(M: np.ndarray, policy: str = "spectral") -> float:
    """Inverse step size.

    ``theory``: M is Sigma_x and eta = 2 * alpha_u with alpha_u = 2 lambda_max(Sigma_x).
    ``spectral``: M is Gamma and eta = |||Gamma|||_op by power iteration, falling
    back to a symmetric eigendecomposition if the power method stalls.
    ``power``: as ``spectral`` but non-convergence raises.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.allclose(M, M.T, atol=1e-10, rtol=0):
        raise ValueError("choose_eta needs a symmetric matrix")
    if not np.any(M):
        raise ValueError("zero matrix gives a degenerate step size")
    if policy == "theory":
        return 4.0 * float(np.linalg.eigvalsh(M)[-1])
    if policy == "spectral":
        try:
            return power_iteration(M)
        except RuntimeError:
            # clustered top eigenvalues stall the power method; the exact spectrum is cheap at these sizes
            return float(np.abs(np.linalg.eigvalsh(M)[[0, -1]]).max())
    if policy == "power":
        return power_iteration(M)
    raise ValueError(f"unknown eta policy {policy!r}")


def lambda_theory(phi: float, n: int, p: int) -> float:
    return 4.0 * phi * math.sqrt(math.log(p) / n)


# --------------------------------------------------------------------------- #
# Convergence diagnostics
# --------------------------------------------------------------------------- #


def fit_contraction(dists, stall_ratio: float = 0.99, min_points: int = 10) -> tuple[float, int]:
    """Fit the geometric decay rate of a distance sequence.

    The plateau index T is the first t with d[t+1] >= stall_ratio * d[t]
    (iterates from T on no longer contract); the rate is exp of the
    least-squares slope of log d[0:T].  An exact zero ends the phase after it
    is reached.
    """
    if isinstance(dists, OptimizerTrace):
        dists = dists.dist_to_reference
    d = np.asarray(dists, dtype=float)
    if d.size == 0 or d[0] <= 0:
        raise ValueError("no geometric phase: empty or zero initial distance")
    T = d.size
    for t in range(d.size - 1):
        if d[t + 1] <= 0:
            T = t + 1
            break
        if d[t + 1] >= stall_ratio * d[t]:
            T = t
            break
    if T < min_points:
        raise ValueError(f"no geometric phase: only {T} pre-plateau points")
    t = np.arange(T)
    slope = np.polyfit(t, np.log(d[:T]), 1)[0]
    return float(math.exp(slope)), int(T)


# --------------------------------------------------------------------------- #
# Solver configuration (scenario-document facing)
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SolverConfig:
    """How to turn a surrogate pair into a solved program.

    ``R=None`` means the oracle radius ||beta*||_1; ``b0=None`` means the
    oracle side-constraint b0 = ||beta*||_2.  In lagrangian mode lambda is
    ``lam`` if given, otherwise ``lam_scale * sqrt(log p / n)``.
    """

    mode: str = "constrained"
    R: Optional[float] = None
    lam: Optional[float] = None
    lam_scale: Optional[float] = None
    b0: Optional[float] = None
    eta_policy: str = "spectral"
    tol: float = 1e-9
    max_iter: int = 10_000
    restarts: int = 0
    store_iterates: bool = False

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "SolverConfig":
        d = dict(d or {})
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}

    def problem(self, pair: SurrogatePair, beta_ref: Optional[np.ndarray] = None,
                k: Optional[int] = None, cov_x: Optional[np.ndarray] = None) -> ProblemSpec:
        """Build the ProblemSpec; ``beta_ref`` supplies oracle radii when R/b0 are unset."""
        if self.eta_policy == "theory":
            if cov_x is None:
                raise ValueError("theory eta policy needs Sigma_x")
            eta = choose_eta(cov_x, "theory")
        else:
            eta = choose_eta(pair.gamma_mat, self.eta_policy)
        if self.mode == "constrained":
            R = self.R
            if R is None:
                if beta_ref is None:
                    raise ValueError("oracle radius needs the reference vector")
                R = float(np.abs(beta_ref).sum())
            return ProblemSpec.constrained(pair, max(R, 1e-12), eta)
        if self.mode != "lagrangian":
            raise ValueError(f"unknown mode {self.mode!r}")
        n, p = pair.n_used, pair.p
        lam = self.lam if self.lam is not None else (self.lam_scale or 0.0) * math.sqrt(math.log(p) / n)
        b0 = self.b0
        if b0 is None:
            if beta_ref is None:
                raise ValueError("oracle b0 needs the reference vector")
            b0 = float(np.linalg.norm(beta_ref))
        if k is None:
            k = int(np.count_nonzero(beta_ref)) if beta_ref is not None else p
        return ProblemSpec.lagrangian(pair, lam, max(b0, 1e-12), max(k, 1), eta)
