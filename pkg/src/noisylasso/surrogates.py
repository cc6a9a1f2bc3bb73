"""Plug-in surrogates (Gamma, gamma) for Sigma_x and Sigma_x beta*.

Each constructor returns a :class:`SurrogatePair` whose matrix may be
indefinite; the quadratic loss 0.5 b'Gb - <g, b> built from it is then
nonconvex, which is the point of the whole exercise.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corruption import CorruptedDataset

DIVISOR_FLOOR = 1e-12
# c0 for phi_additive: 99% quantile of the deviation ratio on 600 calibration runs, rounded up
C0_ADDITIVE = 1.5


@dataclass(frozen=True)
class SurrogatePair:
    gamma_mat: np.ndarray
    gamma_vec: np.ndarray
    provenance: str
    n_used: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        G = np.array(self.gamma_mat, dtype=float)
        g = np.array(self.gamma_vec, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or g.shape != (G.shape[0],):
            raise ValueError("gamma_mat must be p x p and gamma_vec length p")
        G = 0.5 * (G + G.T)
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(g))):
            raise ValueError(f"{self.provenance}: surrogate has non-finite entries")
        G.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "gamma_mat", G)
        object.__setattr__(self, "gamma_vec", g)

    @property
    def p(self) -> int:
        return self.gamma_vec.size

    def loss(self, beta: np.ndarray) -> float:
        return 0.5 * float(beta @ self.gamma_mat @ beta) - float(self.gamma_vec @ beta)

    def to_csv(self, stem) -> list[Path]:
        """Write ``<stem>_matrix.csv``, ``<stem>_vector.csv`` and a JSON sidecar."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        paths = [stem.with_name(stem.name + s) for s in ("_matrix.csv", "_vector.csv", "_meta.json")]
        np.savetxt(paths[0], self.gamma_mat, delimiter=",", fmt="%.17g")
        np.savetxt(paths[1], self.gamma_vec, delimiter=",", fmt="%.17g")
        meta = {"provenance": self.provenance, "n_used": self.n_used, "p": self.p,
                "params": {k: np.asarray(v).tolist() for k, v in self.params.items()}}
        paths[2].write_text(json.dumps(meta, indent=2))
        return paths

    @classmethod
    def from_csv(cls, stem) -> "SurrogatePair":
        stem = Path(stem)
        G = np.loadtxt(stem.with_name(stem.name + "_matrix.csv"), delimiter=",", ndmin=2)
        g = np.loadtxt(stem.with_name(stem.name + "_vector.csv"), delimiter=",", ndmin=1)
        meta = json.loads(stem.with_name(stem.name + "_meta.json").read_text())
        return cls(G, g, meta["provenance"], meta["n_used"], meta.get("params", {}))


def _check_xy(Z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    if Z.ndim != 2 or y.shape != (Z.shape[0],):
        raise ValueError(f"dimension mismatch: Z {Z.shape}, y {y.shape}")
    if Z.shape[0] < 1:
        raise ValueError("need at least one sample")
    return Z, y


def _safe_divide(num: np.ndarray, den: np.ndarray, what: str) -> np.ndarray:
    den = np.asarray(den, dtype=float)
    if np.any(den < DIVISOR_FLOOR):
        raise ValueError(f"{what}: divisor entry below {DIVISOR_FLOOR:g}")
    return num / den


def missing_moment_matrix(rho: np.ndarray) -> np.ndarray:
    """M_ij = (1-rho_i)(1-rho_j) off the diagonal, 1-rho_j on it."""
    keep = 1.0 - np.asarray(rho, dtype=float)
    M = np.outer(keep, keep)
    np.fill_diagonal(M, keep)
    return M


def _rho_vector(rho, p: int) -> np.ndarray:
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (p,)).copy()
    if np.any(rho < 0) or np.any(rho >= 1):
        raise ValueError("missing probabilities must lie in [0, 1)")
    return rho


# --------------------------------------------------------------------------- #
# Constructors
# --------------------------------------------------------------------------- #


def lasso_pair(X, y) -> SurrogatePair:
    X, y = _check_xy(X, y)
    n = X.shape[0]
    return SurrogatePair(X.T @ X / n, X.T @ y / n, "lasso", n)


def additive_pair(Z, y, cov_w) -> SurrogatePair:
    """Gamma = Z'Z/n - cov_w, gamma = Z'y/n for known noise covariance."""
    Z, y = _check_xy(Z, y)
    n, p = Z.shape
    cov_w = np.asarray(cov_w, dtype=float)
    if cov_w.ndim == 0:
        cov_w = float(cov_w) * np.eye(p)
    if cov_w.shape != (p, p):
        raise ValueError("cov_w must be p x p")
    if not np.allclose(cov_w, cov_w.T, atol=1e-12, rtol=0):
        raise ValueError("cov_w must be symmetric")
    return SurrogatePair(Z.T @ Z / n - cov_w, Z.T @ y / n, "additive", n)


def additive_pair_estimated(Z, y, W0) -> SurrogatePair:
    """Additive pair with cov_w replaced by W0'W0/n0 from an independent noise sample."""
    Z, y = _check_xy(Z, y)
    W0 = np.atleast_2d(np.asarray(W0, dtype=float))
    if W0.shape[0] < 1 or W0.shape[1] != Z.shape[1]:
        raise ValueError("W0 must be a nonempty n0 x p matrix")
    n = Z.shape[0]
    cov_w_hat = W0.T @ W0 / W0.shape[0]
    return SurrogatePair(Z.T @ Z / n - cov_w_hat, Z.T @ y / n, "additive-estimated", n,
                         {"cov_w_hat": cov_w_hat})


def replicate_covariance(replicates: Sequence[np.ndarray]) -> np.ndarray:
    """Pooled within-subject covariance from per-subject replicate rows.

    ``replicates[i]`` is a k_i x p array of repeated measurements of subject i.
    """
    if len(replicates) == 0:
        raise ValueError("need at least one subject")
    p = np.atleast_2d(replicates[0]).shape[1]
    scatter = np.zeros((p, p))
    dof = 0
    for i, R in enumerate(replicates):
        R = np.atleast_2d(np.asarray(R, dtype=float))
        if R.shape[0] < 2:
            raise ValueError(f"subject {i} has fewer than 2 replicates")
        if R.shape[1] != p:
            raise ValueError(f"subject {i} has dimension {R.shape[1]}, expected {p}")
        D = R - R.mean(axis=0)
        scatter += D.T @ D
        dof += R.shape[0] - 1
    S = scatter / dof
    return 0.5 * (S + S.T)


def missing_pair(Z, y, rho: float) -> SurrogatePair:
    """Missing-data pair for a common missing probability rho."""
    Z, y = _check_xy(Z, y)
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    n = Z.shape[0]
    Zt = Z / (1.0 - rho)
    S = Zt.T @ Zt / n
    G = S - rho * np.diag(np.diag(S))
    return SurrogatePair(G, Zt.T @ y / n, "missing", n, {"rho": rho})


def missing_pair_general(Z, y, rho) -> SurrogatePair:
    """Missing-data pair with per-column probabilities rho_j."""
    Z, y = _check_xy(Z, y)
    n, p = Z.shape
    rho = _rho_vector(rho, p)
    G = _safe_divide(Z.T @ Z / n, missing_moment_matrix(rho), "missing_pair_general")
    g = _safe_divide(Z.T @ y / n, 1.0 - rho, "missing_pair_general")
    return SurrogatePair(G, g, "missing-general", n, {"rho": rho})


def estimate_missing_rates(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    counts = mask.sum(axis=0)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ValueError(f"column(s) {empty.tolist()} have no observed entries")
    return 1.0 - counts / mask.shape[0]


def missing_pair_estimated(Z, y, mask) -> SurrogatePair:
    """Missing-data pair with rho_j replaced by the observed missing fraction per column."""
    Z, y = _check_xy(Z, y)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != Z.shape:
        raise ValueError("mask must match Z")
    rho_hat = estimate_missing_rates(mask)
    pair = missing_pair_general(Z, y, rho_hat)
    return SurrogatePair(pair.gamma_mat, pair.gamma_vec, "missing-estimated", pair.n_used,
                         {"rho_hat": rho_hat})


def multiplicative_pair(Z, y, eu, euu) -> SurrogatePair:
    Z, y = _check_xy(Z, y)
    n, p = Z.shape
    eu = np.asarray(eu, dtype=float)
    euu = np.asarray(euu, dtype=float)
    if eu.shape != (p,) or euu.shape != (p, p):
        raise ValueError("moment shapes do not match Z")
    if np.any(eu <= 0) or np.any(euu <= 0):
        raise ValueError("multiplicative moments must be strictly positive")
    G = _safe_divide(Z.T @ Z / n, euu, "multiplicative_pair")
    g = _safe_divide(Z.T @ y / n, eu, "multiplicative_pair")
    return SurrogatePair(G, g, "multiplicative", n)


def pair_for_dataset(data: CorruptedDataset, W0: Optional[np.ndarray] = None) -> SurrogatePair:
    """Dispatch on the dataset's corruption model."""
    m = data.model
    if m.kind == "none":
        return lasso_pair(data.Z, data.y)
    if m.kind == "additive":
        if m.estimated:
            if W0 is None:
                raise ValueError("estimated additive model needs an independent noise sample W0")
            return additive_pair_estimated(data.Z, data.y, W0)
        return additive_pair(data.Z, data.y, m.cov_w)
    if m.kind == "missing":
        if m.estimated:
            if data.mask is None:
                raise ValueError("estimated missing model needs the observation mask")
            return missing_pair_estimated(data.Z, data.y, data.mask)
        rho = np.atleast_1d(m.rho)
        if np.all(rho == rho[0]):
            return missing_pair(data.Z, data.y, float(rho[0]))
        return missing_pair_general(data.Z, data.y, rho)
    return multiplicative_pair(data.Z, data.y, m.eu, m.euu)


# --------------------------------------------------------------------------- #
# Deviation conditions
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class DeviationReport:
    lhs_full: float
    lhs_split: tuple[float, float]
    bound: float
    satisfied_full: bool
    satisfied_split: tuple[bool, bool]


def check_deviation(pair: SurrogatePair, beta_star, cov_x, phi: float, n: int, p: int) -> DeviationReport:
    """Evaluate the combined and split sup-norm deviation conditions at level phi sqrt(log p / n)."""
    if phi <= 0:
        raise ValueError("phi must be positive")
    beta_star = np.asarray(beta_star, dtype=float)
    cov_x = np.asarray(cov_x, dtype=float)
    G, g = pair.gamma_mat, pair.gamma_vec
    bound = phi * math.sqrt(math.log(p) / n)
    full = float(np.abs(g - G @ beta_star).max())
    s1 = float(np.abs(g - cov_x @ beta_star).max())
    s2 = float(np.abs((G - cov_x) @ beta_star).max())
    return DeviationReport(full, (s1, s2), bound, full <= bound, (s1 <= bound, s2 <= bound))


def phi_additive(sigma_x: float, sigma_w: float, sigma_eps: float, beta_norm: float, c0: float = 1.0) -> float:
    """c0 * sigma_z * (sigma_w + sigma_eps) * ||beta*||_2 with sigma_z^2 = sigma_x^2 + sigma_w^2."""
    sigma_z = math.sqrt(sigma_x ** 2 + sigma_w ** 2)
    return c0 * sigma_z * (sigma_w + sigma_eps) * beta_norm


def phi_missing(sigma_x: float, rho_max: float, sigma_eps: float, beta_norm: float, c0: float = 1.0) -> float:
    s = sigma_x / (1.0 - rho_max)
    return c0 * s * (sigma_eps + s) * beta_norm


def phi_var_additive(cov_w_op: float, cov_x_op: float, A_op: float, sigma_eps: float,
                     beta_norm: float, c0: float = 1.0) -> float:
    zeta = math.sqrt(cov_w_op + 2.0 * cov_x_op / (1.0 - A_op))
    return c0 * (sigma_eps * zeta + zeta ** 2) * beta_norm


def phi_var_missing(rho_max: float, cov_x_op: float, A_op: float, sigma_eps: float,
                    beta_norm: float, c0: float = 1.0) -> float:
    zeta = math.sqrt(2.0 * cov_x_op / (1.0 - A_op)) / (1.0 - rho_max)
    return c0 * (sigma_eps * zeta + zeta ** 2) * beta_norm


def calibrate_c0(lhs: Sequence[float], unit_bounds: Sequence[float], quantile: float = 0.99) -> float:
    """Smallest c0 (at the given empirical quantile) with lhs <= c0 * unit_bound.

    ``unit_bounds`` are the deviation bounds evaluated with c0 = 1.
    """
    ratios = np.asarray(lhs, dtype=float) / np.asarray(unit_bounds, dtype=float)
    return float(np.quantile(ratios, quantile))
