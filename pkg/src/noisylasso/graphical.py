"""Precision-matrix estimation from corrupted Gaussian samples.

Column j of Theta is recovered by regressing Z^j on Z^{-j} with a corrected
surrogate pair, converting the regression vector into a column of Theta via
the scalar a_j, and finally symmetrising the assembled matrix in the l1
operator norm (maximum absolute column sum) by linear programming.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .corruption import CorruptionModel
from .optimizer import SolverConfig, solve
from .rng import make_rng
from .simplex import LPError, simplex
from .surrogates import SurrogatePair, _safe_divide, estimate_missing_rates, missing_moment_matrix

log = logging.getLogger(__name__)

SINGULAR_TOL = 1e-10
SIMPLEX_MAX_P = 8


@dataclass(frozen=True)
class GraphSpec:
    family: str
    p: int
    k: Optional[int] = None
    edge_weight: Optional[float] = None
    rescale_target: float = 1.0

    def __post_init__(self):
        if self.family not in ("chain", "star", "erdos_renyi"):
            raise ValueError(f"unknown graph family {self.family!r}")
        if self.p < 2:
            raise ValueError("need p >= 2")

    @property
    def degree(self) -> int:
        """Sparsity parameter k used in the n / (k log p) rescaling."""
        if self.family == "chain":
            return 2
        if self.family == "star":
            return self.k if self.k is not None else math.ceil(0.1 * self.p)
        return self.k if self.k is not None else math.ceil(math.log(self.p))


@dataclass(frozen=True)
class PrecisionEstimate:
    theta_cols: list
    a_hat: np.ndarray
    theta_tilde: np.ndarray
    theta_hat: np.ndarray
    sigma_hat: np.ndarray

    def to_csv(self, stem) -> list[Path]:
        """Write ``<stem>_theta_hat.csv``, ``<stem>_theta_tilde.csv`` and ``<stem>_a_hat.csv``."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        out = []
        for suffix, arr in (("_theta_hat.csv", self.theta_hat), ("_theta_tilde.csv", self.theta_tilde),
                            ("_a_hat.csv", self.a_hat)):
            path = stem.with_name(stem.name + suffix)
            np.savetxt(path, np.atleast_2d(arr), delimiter=",", fmt="%.17g")
            out.append(path)
        return out


def generate_graph_precision(spec: GraphSpec, seed=None, rescale: bool = True) -> np.ndarray:
    """Precision matrix for a chain, star or Erdos-Renyi graph, scaled to unit operator norm."""
    p = spec.p
    if spec.family == "chain":
        w = 0.1 if spec.edge_weight is None else spec.edge_weight
        Theta = np.eye(p) + w * (np.eye(p, k=1) + np.eye(p, k=-1))
    elif spec.family == "star":
        w = 0.1 if spec.edge_weight is None else spec.edge_weight
        deg = spec.degree
        if not 1 <= deg <= p - 1:
            raise ValueError("star hub degree must lie in [1, p-1]")
        Theta = np.eye(p)
        Theta[0, 1:deg + 1] = w
        Theta[1:deg + 1, 0] = w
    else:
        w = 0.5 if spec.edge_weight is None else spec.edge_weight
        rng = make_rng(seed)
        upper = np.triu(rng.random((p, p)) < spec.degree / p, k=1)
        B = w * (upper | upper.T).astype(float)
        mu = np.linalg.eigvalsh(B)
        if mu[-1] - mu[0] <= 1e-12:
            raise ValueError("Erdos-Renyi draw has no edges; cannot reach condition number p")
        # (mu_max + d) / (mu_min + d) = p solved for d
        delta = (mu[-1] - p * mu[0]) / (p - 1)
        Theta = B + delta * np.eye(p)
    Theta = 0.5 * (Theta + Theta.T)
    ev = np.linalg.eigvalsh(Theta)
    if ev[0] <= 0:
        raise ValueError("generated precision matrix is not positive definite")
    if rescale:
        Theta = Theta * (spec.rescale_target / ev[-1])
    return Theta


def regression_vectors(Theta: np.ndarray) -> list[np.ndarray]:
    """theta^j = -Theta_{-j,j} / Theta_jj, the population column-regression vectors."""
    p = Theta.shape[0]
    return [-np.delete(Theta[:, j], j) / Theta[j, j] for j in range(p)]


# --------------------------------------------------------------------------- #
# Moment estimates and column surrogates
# --------------------------------------------------------------------------- #


def _moments(Z: np.ndarray, model: CorruptionModel, mask: Optional[np.ndarray]):
    """Return (Sigma_hat, cross) with gamma^(j) = cross[-j, j]."""
    Z = np.asarray(Z, dtype=float)
    n, p = Z.shape
    S = Z.T @ Z / n
    if model.kind == "none":
        return S, S
    if model.kind == "additive":
        cov_w = np.asarray(model.cov_w, dtype=float)
        if cov_w.ndim == 0:
            cov_w = float(cov_w) * np.eye(p)
        return S - cov_w, S
    if model.kind == "missing":
        if model.estimated:
            if mask is None:
                raise ValueError("estimated missing model needs the mask")
            rho = estimate_missing_rates(mask)
        else:
            rho = np.broadcast_to(np.asarray(model.rho, dtype=float), (p,))
        keep = 1.0 - rho
        sigma = _safe_divide(S, missing_moment_matrix(rho), "column_surrogates")
        cross = _safe_divide(S, np.outer(keep, keep), "column_surrogates")
        return sigma, cross
    raise ValueError(f"column regressions support none/additive/missing, not {model.kind!r}")


def column_surrogates(Z, model: CorruptionModel, j: int, mask=None) -> SurrogatePair:
    """Surrogate pair for regressing column j on the remaining columns."""
    Z = np.asarray(Z, dtype=float)
    p = Z.shape[1]
    if not 0 <= j < p:
        raise ValueError(f"column index {j} out of range")
    sigma, cross = _moments(Z, model, mask)
    rest = np.delete(np.arange(p), j)
    return SurrogatePair(sigma[np.ix_(rest, rest)], cross[rest, j], f"column-{j}", Z.shape[0])


# --------------------------------------------------------------------------- #
# l1-operator-norm symmetrisation
# --------------------------------------------------------------------------- #


def l1op_norm(M: np.ndarray) -> float:
    """Maximum absolute column sum."""
    return float(np.abs(M).sum(axis=0).max())


def _lp_data(Tt: np.ndarray):
    """Inequality form for min t over symmetric X with column sums of |X - Tt| <= t.

    Variables: [x (upper triangle incl. diagonal), s (p*p slacks, column-major), t].
    """
    p = Tt.shape[0]
    iu, ju = np.triu_indices(p)
    nsym = iu.size
    sym_index = np.empty((p, p), dtype=int)
    sym_index[iu, ju] = np.arange(nsym)
    sym_index[ju, iu] = np.arange(nsym)
    ns = p * p
    nv = nsym + ns + 1
    rows, cols, vals, b = [], [], [], []
    r = 0
    for j in range(p):
        for i in range(p):
            s = nsym + j * p + i
            x = sym_index[i, j]
            # x - s <= Tt_ij  and  -x - s <= -Tt_ij
            rows += [r, r, r + 1, r + 1]
            cols += [x, s, x, s]
            vals += [1.0, -1.0, -1.0, -1.0]
            b += [Tt[i, j], -Tt[i, j]]
            r += 2
    for j in range(p):
        for i in range(p):
            rows.append(r)
            cols.append(nsym + j * p + i)
            vals.append(1.0)
        rows.append(r)
        cols.append(nv - 1)
        vals.append(-1.0)
        b.append(0.0)
        r += 1
    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, nv))
    return A, np.array(b), nsym, ns, (iu, ju)


def _assemble(x: np.ndarray, p: int, tri) -> np.ndarray:
    iu, ju = tri
    X = np.zeros((p, p))
    X[iu, ju] = x
    X[ju, iu] = x
    return X


def _solve_lp_highs(c, A, b, bounds):
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise LPError(f"HiGHS failed: {res.message}")
    return res.x


def _solve_lp_simplex(c, A, b, nfree):
    # split the free symmetric entries into positive and negative parts
    A = A.toarray()
    A_split = np.hstack([A[:, :nfree], -A[:, :nfree], A[:, nfree:]])
    c_split = np.concatenate([c[:nfree], -c[:nfree], c[nfree:]])
    res = simplex(c_split, A_ub=A_split, b_ub=b)
    if res.status != "optimal":
        raise LPError(f"simplex returned {res.status}")
    z = res.x
    return np.concatenate([z[:nfree] - z[nfree:2 * nfree], z[2 * nfree:]])


def symmetrize_l1op(theta_tilde: np.ndarray, method: str = "lp", solver: str = "auto") -> np.ndarray:
    """Closest symmetric matrix to ``theta_tilde`` in the l1 operator norm.

    ``method="average"`` returns (T + T')/2 instead of solving the LP.  Among
    LP minimisers, the one with the smallest total absolute deviation is
    returned (second LP stage with the optimal column bound fixed).
    """
    Tt = np.asarray(theta_tilde, dtype=float)
    if Tt.ndim != 2 or Tt.shape[0] != Tt.shape[1]:
        raise ValueError("symmetrize_l1op needs a square matrix")
    if method == "average":
        return 0.5 * (Tt + Tt.T)
    if method != "lp":
        raise ValueError(f"unknown method {method!r}")
    p = Tt.shape[0]
    if solver == "auto":
        solver = "simplex" if p <= SIMPLEX_MAX_P else "highs"
    A, b, nsym, ns, tri = _lp_data(Tt)
    nv = nsym + ns + 1
    c1 = np.zeros(nv)
    c1[-1] = 1.0
    bounds = [(None, None)] * nsym + [(0, None)] * (ns + 1)
    run = (lambda c, A_, b_: _solve_lp_highs(c, A_, b_, bounds)) if solver == "highs" else (
        lambda c, A_, b_: _solve_lp_simplex(c, A_, b_, nsym))
    if solver not in ("highs", "simplex"):
        raise ValueError(f"unknown LP solver {solver!r}")
    t_star = run(c1, A, b)[-1]
    # stage 2: fix the max column sum and minimise the total deviation
    c2 = np.zeros(nv)
    c2[nsym:nsym + ns] = 1.0
    cap = sp.csr_matrix(([1.0], ([0], [nv - 1])), shape=(1, nv))
    A2 = sp.vstack([A, cap]).tocsr()
    b2 = np.append(b, t_star + 1e-12 * max(1.0, abs(t_star)))
    x = run(c2, A2, b2)
    return _assemble(x[:nsym], p, tri)


# --------------------------------------------------------------------------- #
# Column-regression estimator
# --------------------------------------------------------------------------- #


def _precision_from_moments(sigma: np.ndarray, cross: np.ndarray, n: int, solver: SolverConfig,
                            theta_true: Optional[np.ndarray], symmetrize: str, lp_solver: str) -> PrecisionEstimate:
    p = sigma.shape[0]
    sigma = 0.5 * (sigma + sigma.T)
    oracle = regression_vectors(theta_true) if theta_true is not None else None
    cols, a_hat = [], np.empty(p)
    singular = []
    for j in range(p):
        rest = np.delete(np.arange(p), j)
        pair = SurrogatePair(sigma[np.ix_(rest, rest)], cross[rest, j], f"column-{j}", n)
        ref = oracle[j] if oracle is not None else None
        spec = solver.problem(pair, beta_ref=ref, k=None if ref is None else max(1, np.count_nonzero(ref)))
        theta_j, _ = solve(spec, tol=solver.tol, max_iter=solver.max_iter)
        cols.append(theta_j)
        denom = sigma[j, j] - sigma[j, rest] @ theta_j
        if abs(denom) < SINGULAR_TOL:
            singular.append(j)
            a_hat[j] = np.nan
        else:
            a_hat[j] = -1.0 / denom
    if singular:
        raise ZeroDivisionError(f"singular a_j for column(s) {singular}")
    Tt = np.zeros((p, p))
    for j in range(p):
        rest = np.delete(np.arange(p), j)
        Tt[j, rest] = a_hat[j] * cols[j]
        Tt[j, j] = -a_hat[j]
    Th = symmetrize_l1op(Tt, method=symmetrize, solver=lp_solver)
    return PrecisionEstimate(cols, a_hat, Tt, Th, sigma)


def estimate_precision(Z, model: CorruptionModel, mask=None, solver: Optional[SolverConfig] = None,
                       theta_true: Optional[np.ndarray] = None, symmetrize: str = "lp",
                       lp_solver: str = "auto") -> PrecisionEstimate:
    """Estimate Theta from corrupted samples.

    ``theta_true`` is only used for oracle radii (when the solver config leaves
    R or b0 unset).  Radius-free lagrangian configs need no ground truth.
    """
    Z = np.asarray(Z, dtype=float)
    solver = solver or SolverConfig()
    sigma, cross = _moments(Z, model, mask)
    return _precision_from_moments(sigma, cross, Z.shape[0], solver, theta_true, symmetrize, lp_solver)


def precision_from_covariance(sigma: np.ndarray, solver: Optional[SolverConfig] = None,
                              theta_true: Optional[np.ndarray] = None, symmetrize: str = "lp",
                              lp_solver: str = "auto", n: int = 1) -> PrecisionEstimate:
    """Run the column-regression estimator directly on a covariance (surrogate) matrix."""
    sigma = np.asarray(sigma, dtype=float)
    solver = solver or SolverConfig()
    return _precision_from_moments(sigma, sigma, n, solver, theta_true, symmetrize, lp_solver)
