"""Synthetic designs, sparse ground truth, responses and corruption channels.

Designs are Gaussian (or Rademacher-mixed) rows with a prescribed covariance,
either i.i.d. or from a stationary VAR(1) process.  Corruption channels turn
a clean design ``X`` into the observed matrix ``Z``:

* additive:        Z = X + W, rows of W ~ N(0, cov_w)
* missing:         Z_ij = X_ij with prob. 1 - rho_j, else 0 (plus a mask)
* multiplicative:  Z = X * U, rows of U i.i.d. from a noise law
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import yaml

from .rng import make_rng

STATIONARY_TOL = 1e-10


def _check_square_symmetric(M: np.ndarray, name: str) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.allclose(M, M.T, atol=1e-12, rtol=0.0):
        raise ValueError(f"{name} must be symmetric")


def _sqrt_psd(M: np.ndarray, name: str) -> np.ndarray:
    """Factor L with L @ L.T == M for a PSD matrix (Cholesky when possible)."""
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(M)
        if w.min() < -1e-10 * max(1.0, abs(w).max()):
            raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w.min():.3g})")
        return V * np.sqrt(np.clip(w, 0.0, None))


# --------------------------------------------------------------------------- #
# Domain types
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class DesignSpec:
    """Row law of the design matrix.

    ``mode="iid"`` draws rows independently from N(0, cov).  ``mode="var"``
    draws a stationary VAR(1) path x_{i+1} = A x_i + v_i with v_i ~ N(0, cov_v);
    ``cov`` must then be the stationary covariance (see :meth:`var`).
    """

    n: int
    p: int
    cov: np.ndarray
    mode: str = "iid"
    A: Optional[np.ndarray] = None
    cov_v: Optional[np.ndarray] = None
    dist: str = "gaussian"

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "cov", cov)
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if cov.shape != (self.p, self.p):
            raise ValueError(f"cov must be {self.p}x{self.p}, got {cov.shape}")
        _check_square_symmetric(cov, "cov")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValueError("cov must be positive definite")
        if self.dist not in ("gaussian", "rademacher"):
            raise ValueError(f"unknown distribution tag {self.dist!r}")
        if self.mode == "var":
            if self.A is None or self.cov_v is None:
                raise ValueError("var mode needs A and cov_v")
            A = np.asarray(self.A, dtype=float)
            cov_v = np.asarray(self.cov_v, dtype=float)
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "cov_v", cov_v)
            if np.linalg.norm(A, 2) >= 1:
                raise ValueError("var mode requires spectral norm of A < 1")
            resid = np.abs(cov - A @ cov @ A.T - cov_v).max()
            if resid > 1e-8:
                raise ValueError(f"cov does not solve the stationarity equation (residual {resid:.2e})")
        elif self.mode != "iid":
            raise ValueError(f"unknown design mode {self.mode!r}")

    @classmethod
    def var(cls, n: int, A: np.ndarray, cov_v: np.ndarray, **kw) -> "DesignSpec":
        A = np.asarray(A, dtype=float)
        cov = solve_stationary_covariance(A, cov_v)
        return cls(n=n, p=A.shape[0], cov=cov, mode="var", A=A, cov_v=np.asarray(cov_v, float), **kw)


@dataclass(frozen=True)
class GroundTruth:
    beta_star: np.ndarray
    support: np.ndarray
    sigma_eps: float = 0.0

    def __post_init__(self):
        beta = np.asarray(self.beta_star, dtype=float)
        support = np.asarray(self.support, dtype=int)
        object.__setattr__(self, "beta_star", beta)
        object.__setattr__(self, "support", support)
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be nonnegative")
        off = np.ones(beta.size, dtype=bool)
        off[support] = False
        if np.any(beta[off] != 0):
            raise ValueError("beta_star must vanish off its support")
        if support.size > beta.size or np.unique(support).size != support.size:
            raise ValueError("support must be a set of at most p indices")

    @property
    def k(self) -> int:
        return int(self.support.size)


@dataclass(frozen=True)
class CorruptionModel:
    """Tagged description of the channel Z | X.

    kind is one of ``none``, ``additive``, ``missing``, ``multiplicative``.
    ``estimated`` flags that the channel parameter (cov_w or rho) is to be
    estimated from data rather than treated as known.
    """

    kind: str = "none"
    cov_w: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    eu: Optional[np.ndarray] = None
    euu: Optional[np.ndarray] = None
    estimated: bool = False

    def __post_init__(self):
        if self.kind not in ("none", "additive", "missing", "multiplicative"):
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        for name in ("cov_w", "rho", "eu", "euu"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.asarray(val, dtype=float))
        if self.kind == "additive" and self.cov_w is None and not self.estimated:
            raise ValueError("additive model needs cov_w unless estimated")
        if self.kind == "missing" and self.rho is None and not self.estimated:
            raise ValueError("missing model needs rho unless estimated")
        if self.kind == "multiplicative" and (self.eu is None or self.euu is None):
            raise ValueError("multiplicative model needs eu and euu")


@dataclass(frozen=True)
class CorruptedDataset:
    Z: np.ndarray
    y: np.ndarray
    model: CorruptionModel
    mask: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        n, p = self.Z.shape
        if self.y.shape != (n,):
            raise ValueError("y must have one entry per row of Z")
        if self.mask is not None:
            if self.mask.shape != (n, p) or self.mask.dtype != bool:
                raise ValueError("mask must be an n x p boolean array")
            if np.any(self.Z[~self.mask] != 0.0):
                raise ValueError("masked entries of Z must be exactly 0")

    def to_csv(self, stem) -> tuple[Path, Path]:
        """Write ``<stem>_Z.csv`` (with ``_observed`` mask columns) and ``<stem>_y.csv``."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        n, p = self.Z.shape
        z_path = stem.with_name(stem.name + "_Z.csv")
        y_path = stem.with_name(stem.name + "_y.csv")
        header = [f"z{j}" for j in range(p)]
        if self.mask is not None:
            header += [f"z{j}_observed" for j in range(p)]
        with open(z_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(n):
                row = [repr(float(v)) for v in self.Z[i]]
                if self.mask is not None:
                    row += [str(int(b)) for b in self.mask[i]]
                w.writerow(row)
        with open(y_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y"])
            for v in self.y:
                w.writerow([repr(float(v))])
        return z_path, y_path


def read_dataset_csv(stem, model: CorruptionModel | None = None) -> CorruptedDataset:
    stem = Path(stem)
    with open(stem.with_name(stem.name + "_Z.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    p = sum(1 for h in header if not h.endswith("_observed"))
    data = np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))
    Z = data[:, :p]
    mask = data[:, p:].astype(bool) if len(header) > p else None
    with open(stem.with_name(stem.name + "_y.csv"), newline="") as fh:
        y = np.array([float(r[0]) for r in list(csv.reader(fh))[1:]])
    return CorruptedDataset(Z=Z, y=y, model=model or CorruptionModel(), mask=mask)


# --------------------------------------------------------------------------- #
# Designs
# --------------------------------------------------------------------------- #


def solve_stationary_covariance(A, cov_v, max_iter: int = 100_000, tol: float = 1e-12) -> np.ndarray:
    """Solve cov = A cov A^T + cov_v by fixed-point iteration from cov_v."""
    A = np.asarray(A, dtype=float)
    cov_v = np.asarray(cov_v, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or cov_v.shape != A.shape:
        raise ValueError("A and cov_v must be square with matching shapes")
    _check_square_symmetric(cov_v, "cov_v")
    if np.linalg.norm(A, 2) >= 1:
        raise ValueError("spectral norm of A must be < 1")
    S = cov_v.copy()
    for _ in range(max_iter):
        S_next = A @ S @ A.T + cov_v
        S_next = 0.5 * (S_next + S_next.T)
        step = np.abs(S_next - S).max()
        S = S_next
        if step <= tol * max(1.0, np.abs(S).max()):
            break
    else:
        raise RuntimeError("stationary covariance iteration did not converge; check the spectral radius of A")
    resid = np.abs(S - A @ S @ A.T - cov_v).max()
    if resid > STATIONARY_TOL:
        raise RuntimeError(f"stationarity residual {resid:.2e} exceeds {STATIONARY_TOL}")
    return S


def var_driving_matrix(p: int, op_norm: float, seed=None) -> np.ndarray:
    """Symmetric A = op_norm * Q diag(d) Q^T with random orthogonal Q and max|d| = 1."""
    if not 0 <= op_norm < 1:
        raise ValueError("op_norm must lie in [0, 1)")
    rng = make_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    Q = Q * np.sign(np.diag(R))
    d = rng.uniform(-1.0, 1.0, size=p)
    d /= np.abs(d).max()
    A = op_norm * (Q * d) @ Q.T
    return 0.5 * (A + A.T)


def _draw_rows(rng: np.random.Generator, n: int, L: np.ndarray, dist: str) -> np.ndarray:
    p = L.shape[0]
    if dist == "gaussian":
        G = rng.standard_normal((n, p))
    else:
        G = rng.choice(np.array([-1.0, 1.0]), size=(n, p))
    return G @ L.T


def generate_design(spec: DesignSpec, seed=None) -> np.ndarray:
    """Draw an n x p design with rows distributed according to ``spec``."""
    rng = make_rng(seed)
    try:
        L = np.linalg.cholesky(spec.cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("design covariance is not positive definite") from exc
    if spec.mode == "iid":
        return _draw_rows(rng, spec.n, L, spec.dist)
    Lv = np.linalg.cholesky(spec.cov_v)
    X = np.empty((spec.n, spec.p))
    X[0] = L @ rng.standard_normal(spec.p)
    V = rng.standard_normal((spec.n - 1, spec.p)) @ Lv.T
    A = spec.A
    for i in range(spec.n - 1):
        X[i + 1] = A @ X[i] + V[i]
    return X


def generate_sparse_beta(p: int, k: int, norm_target: float = 1.0, seed=None, sigma_eps: float = 0.0) -> GroundTruth:
    """k-sparse vector with equal-magnitude random-sign entries and l2 norm ``norm_target``."""
    if k > p:
        raise ValueError(f"sparsity k={k} exceeds dimension p={p}")
    if k < 0 or norm_target <= 0:
        raise ValueError("need k >= 0 and norm_target > 0")
    rng = make_rng(seed)
    support = np.sort(rng.choice(p, size=k, replace=False))
    signs = rng.choice(np.array([-1.0, 1.0]), size=k)
    beta = np.zeros(p)
    if k:
        beta[support] = signs * norm_target / math.sqrt(k)
    return GroundTruth(beta_star=beta, support=support, sigma_eps=sigma_eps)


def generate_response(X: np.ndarray, beta_star: np.ndarray, sigma_eps: float, seed=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if X.shape[1] != beta_star.shape[0]:
        raise ValueError("X and beta_star dimensions disagree")
    if sigma_eps < 0:
        raise ValueError("sigma_eps must be nonnegative")
    rng = make_rng(seed)
    eps = rng.standard_normal(X.shape[0])
    return X @ beta_star + sigma_eps * eps


# --------------------------------------------------------------------------- #
# Corruption channels
# --------------------------------------------------------------------------- #


def _as_cov(cov_w, p: int) -> np.ndarray:
    cov_w = np.asarray(cov_w, dtype=float)
    if cov_w.ndim == 0:
        return float(cov_w) * np.eye(p)
    if cov_w.ndim == 1:
        return np.diag(cov_w)
    return cov_w


def _as_rho(rho, p: int) -> np.ndarray:
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (p,)).copy()
    if np.any(rho < 0) or np.any(rho >= 1):
        raise ValueError("missing probabilities must lie in [0, 1)")
    return rho


def apply_additive_noise(X: np.ndarray, cov_w, seed=None) -> np.ndarray:
    """Z = X + W with rows of W i.i.d. N(0, cov_w).  A scalar cov_w means cov_w * I."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    cov = _as_cov(cov_w, p)
    _check_square_symmetric(cov, "cov_w")
    if not np.any(cov):
        return X.copy()
    L = _sqrt_psd(cov, "cov_w")
    rng = make_rng(seed)
    return X + rng.standard_normal((n, p)) @ L.T


def apply_missing(X: np.ndarray, rho, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Drop entry (i, j) independently with probability rho_j; returns (Z, mask)."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    rho = _as_rho(rho, p)
    rng = make_rng(seed)
    mask = rng.random((n, p)) >= rho
    return np.where(mask, X, 0.0), mask


@dataclass(frozen=True)
class MultiplicativeNoise:
    """Law of the rows of U, with its first two moments.

    ``draw(rng, n)`` returns an n x p array of i.i.d. rows.
    """

    draw: Callable[[np.random.Generator, int], np.ndarray]
    mean: np.ndarray
    second_moment: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        if np.any(np.asarray(self.mean) <= 0) or np.any(np.asarray(self.second_moment) <= 0):
            raise ValueError("multiplicative noise moments must be strictly positive")


def bernoulli_noise(rho) -> MultiplicativeNoise:
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(rho >= 1):
        raise ValueError("missing probabilities must lie in [0, 1)")
    keep = 1.0 - rho
    M = np.outer(keep, keep)
    np.fill_diagonal(M, keep)
    return MultiplicativeNoise(
        draw=lambda rng, n: (rng.random((n, rho.size)) >= rho).astype(float),
        mean=keep, second_moment=M, name="bernoulli",
    )


def uniform_noise(low: float, high: float, p: int) -> MultiplicativeNoise:
    if not 0 <= low < high:
        raise ValueError("need 0 <= low < high")
    m = 0.5 * (low + high)
    second = (low * low + low * high + high * high) / 3.0
    M = np.full((p, p), m * m)
    np.fill_diagonal(M, second)
    return MultiplicativeNoise(
        draw=lambda rng, n: rng.uniform(low, high, size=(n, p)),
        mean=np.full(p, m), second_moment=M, name="uniform",
    )


def constant_noise(p: int) -> MultiplicativeNoise:
    return MultiplicativeNoise(
        draw=lambda rng, n: np.ones((n, p)),
        mean=np.ones(p), second_moment=np.ones((p, p)), name="constant",
    )


def apply_multiplicative(X: np.ndarray, noise: MultiplicativeNoise, seed=None) -> np.ndarray:
    """Z = X * U with rows of U drawn from ``noise`` independently of X."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if np.asarray(noise.mean).shape != (p,) or np.asarray(noise.second_moment).shape != (p, p):
        raise ValueError("noise moments do not match the design dimension")
    U = noise.draw(make_rng(seed), n)
    return X * U


# --------------------------------------------------------------------------- #
# Config document
# --------------------------------------------------------------------------- #

CONFIG_KEYS = ("n", "p", "k", "mode", "sigma_eps", "sigma_w", "rho", "A_norm", "seed")


@dataclass
class SimulationConfig:
    """Flat, human-readable description of one simulated regression problem.

    Sigma_x is the identity in i.i.d. mode; in VAR mode the driving matrix is
    a random symmetric matrix with spectral norm ``A_norm`` and Sigma_v = I.
    ``beta_pattern`` records the (equal-magnitude, random-sign) convention.
    """

    n: int
    p: int
    k: int
    mode: str = "iid"
    sigma_eps: float = 0.5
    sigma_w: float = 0.0
    rho: float = 0.0
    A_norm: float = 0.0
    seed: int = 0
    beta_norm: float = 1.0
    beta_pattern: str = "equal-magnitude-random-sign"
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        if not d["extra"]:
            d.pop("extra")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        missing = [k for k in ("n", "p", "k") if k not in d]
        if missing:
            raise ValueError(f"config missing keys: {missing}")
        known = {f for f in cls.__dataclass_fields__}
        extra = {k: v for k, v in d.items() if k not in known}
        kw = {k: v for k, v in d.items() if k in known}
        kw.setdefault("extra", {}).update(extra)
        return cls(**kw)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    @classmethod
    def load(cls, path) -> "SimulationConfig":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))

    def build(self) -> tuple[DesignSpec, GroundTruth, CorruptionModel]:
        seeds = np.random.SeedSequence(self.seed).spawn(2)
        if self.mode == "var":
            A = var_driving_matrix(self.p, self.A_norm, seeds[0])
            design = DesignSpec.var(self.n, A, np.eye(self.p))
        else:
            design = DesignSpec(n=self.n, p=self.p, cov=np.eye(self.p))
        truth = generate_sparse_beta(self.p, self.k, self.beta_norm, seeds[1], sigma_eps=self.sigma_eps)
        if self.rho > 0:
            model = CorruptionModel("missing", rho=np.full(self.p, self.rho))
        elif self.sigma_w > 0:
            model = CorruptionModel("additive", cov_w=self.sigma_w ** 2 * np.eye(self.p))
        else:
            model = CorruptionModel("none")
        return design, truth, model
