"""Empirical probes of the lower/upper restricted eigenvalue (RE) conditions.

Certifying an RE bound over all of R^p is intractable, so these helpers
either enumerate k-sparse supports exactly (small p) or evaluate the
quadratic form along a random probe family biased towards the sparse and
cone-like directions where the condition matters.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import make_rng

MAX_SUPPORTS = 10 ** 6
# c in tau_lower = c log p / n for corrected additive surrogates with Sigma_x = I
TAU_LOWER_CONST = 1.0


@dataclass(frozen=True)
class ReConstants:
    alpha_lower: float
    tau_lower: float
    alpha_upper: float
    tau_upper: float
    method: str

    def __post_init__(self):
        if self.tau_lower < 0 or self.tau_upper < 0:
            raise ValueError("RE tolerances must be nonnegative")


def quadratic_form(G: np.ndarray, theta: np.ndarray) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(theta @ np.asarray(G) @ theta)


def verify_lower_re(G: np.ndarray, alpha: float, tau: float, probes) -> list[np.ndarray]:
    """Return every probe with theta' G theta < alpha ||theta||_2^2 - tau ||theta||_1^2."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[0] == 0:
        raise ValueError("probe set is empty")
    q = np.einsum("ij,jk,ik->i", probes, G, probes)
    rhs = alpha * (probes ** 2).sum(axis=1) - tau * np.abs(probes).sum(axis=1) ** 2
    # relative slack guards against rounding on exact equality
    bad = q < rhs - 1e-12 * np.maximum(1.0, np.abs(rhs))
    return [probes[i] for i in np.flatnonzero(bad)]


def verify_upper_re(G: np.ndarray, alpha: float, tau: float, probes) -> list[np.ndarray]:
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[0] == 0:
        raise ValueError("probe set is empty")
    q = np.einsum("ij,jk,ik->i", probes, G, probes)
    rhs = alpha * (probes ** 2).sum(axis=1) + tau * np.abs(probes).sum(axis=1) ** 2
    bad = q > rhs + 1e-12 * np.maximum(1.0, np.abs(rhs))
    return [probes[i] for i in np.flatnonzero(bad)]


def spectrum(G: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or not np.allclose(G, G.T, atol=1e-10, rtol=0):
        raise ValueError("spectrum needs a symmetric matrix")
    return np.linalg.eigvalsh(G)


def sparse_eigenvalues(G: np.ndarray, k: int) -> tuple[float, float]:
    """(min, max) eigenvalue of G_SS over all supports |S| = k."""
    p = G.shape[0]
    if math.comb(p, k) > MAX_SUPPORTS:
        raise ValueError(f"C({p}, {k}) supports exceed the enumeration cap {MAX_SUPPORTS}")
    lo, hi = math.inf, -math.inf
    for S in itertools.combinations(range(p), k):
        w = np.linalg.eigvalsh(G[np.ix_(S, S)])
        lo = min(lo, w[0])
        hi = max(hi, w[-1])
    return float(lo), float(hi)


def _sparse_unit(rng, p, k):
    v = np.zeros(p)
    v[rng.choice(p, size=k, replace=False)] = rng.standard_normal(k)
    return v


def sample_probes(p: int, k: int, count: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Unit probes: 50% k-sparse, 25% dense, 25% difference of two k-sparse vectors.

    Probes are drawn one at a time from a single stream, so the first m probes
    of a larger request coincide with a request for m.  Returns (probes, is_sparse).
    """
    rng = make_rng(seed)
    out = np.empty((count, p))
    sparse = np.empty(count, dtype=bool)
    for i in range(count):
        kind = i % 4
        if kind in (0, 1):
            v = _sparse_unit(rng, p, k)
        elif kind == 2:
            v = rng.standard_normal(p)
        else:
            v = _sparse_unit(rng, p, k) - _sparse_unit(rng, p, k)
        norm = np.linalg.norm(v)
        out[i] = v / norm if norm > 0 else np.eye(p)[0]
        sparse[i] = kind != 2
    return out, sparse


def _fit_tau(shortfall: np.ndarray, l1sq: np.ndarray) -> float:
    # one-variable nonnegative least squares of shortfall ~ tau * ||theta||_1^2
    den = float(l1sq @ l1sq)
    return max(0.0, float(shortfall @ l1sq) / den) if den > 0 else 0.0


def estimate_re_constants(G: np.ndarray, k: int, strategy: str = "exact", n_probes: int = 10_000,
                          seed=None) -> ReConstants:
    """Summarise RE behaviour of G by (alpha_l, tau_l, alpha_u, tau_u).

    ``exact`` enumerates all k-sparse supports and reports the sparse
    eigenvalue extremes with zero tolerance.  ``sampled`` takes the Rayleigh
    quotient extremes over sparse/cone probes and fits each tolerance to the
    shortfall of all probes against ||theta||_1^2.
    """
    G = np.asarray(G, dtype=float)
    p = G.shape[0]
    if not 1 <= k <= p:
        raise ValueError("need 1 <= k <= p")
    if strategy == "exact":
        lo, hi = sparse_eigenvalues(G, k)
        return ReConstants(lo, 0.0, hi, 0.0, "exact-enumeration")
    if strategy != "sampled":
        raise ValueError(f"unknown strategy {strategy!r}")
    probes, sparse = sample_probes(p, k, n_probes, seed)
    q = np.einsum("ij,jk,ik->i", probes, G, probes)
    l1sq = np.abs(probes).sum(axis=1) ** 2
    lo = float(q[sparse].min())
    hi = float(q[sparse].max())
    tau_lo = _fit_tau(np.maximum(lo - q, 0.0), l1sq)
    tau_hi = _fit_tau(np.maximum(q - hi, 0.0), l1sq)
    return ReConstants(lo, tau_lo, hi, tau_hi, "sampled")


def write_violations_csv(path, G: np.ndarray, violations, alpha: float, tau: float,
                         include_vectors: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        p = G.shape[0]
        header = ["index", "quadratic_form", "l2_sq", "l1_sq", "rhs"]
        if include_vectors:
            header += [f"theta{j}" for j in range(p)]
        w.writerow(header)
        for i, th in enumerate(violations):
            l2, l1 = float(th @ th), float(np.abs(th).sum() ** 2)
            row = [i, repr(quadratic_form(G, th)), repr(l2), repr(l1), repr(alpha * l2 - tau * l1)]
            if include_vectors:
                row += [repr(float(x)) for x in th]
            w.writerow(row)
    return path


def write_spectrum_csv(path, eigenvalues) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue"])
        for i, ev in enumerate(eigenvalues):
            w.writerow([i, repr(float(ev))])
    return path
