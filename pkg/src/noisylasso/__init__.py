"""Sparse regression and graphical model estimation from noisy or missing covariates.

Nonconvex corrected-lasso estimators solved by projected and composite
gradient descent, with tools for checking restricted eigenvalue conditions
and a seeded experiment runner.
"""
from .corruption import (CorruptedDataset, CorruptionModel, DesignSpec, GroundTruth, SimulationConfig,
                         apply_additive_noise, apply_missing, apply_multiplicative, generate_design,
                         generate_response, generate_sparse_beta)
from .graphical import GraphSpec, estimate_precision, generate_graph_precision, symmetrize_l1op
from .optimizer import (ProblemSpec, SolverConfig, choose_eta, fit_contraction, pgd_constrained,
                        pgd_lagrangian, project_l1, prox_l1_in_ball, solve)
from .re_certify import ReConstants, estimate_re_constants, verify_lower_re, verify_upper_re
from .surrogates import (SurrogatePair, additive_pair, lasso_pair, missing_pair, missing_pair_general,
                         multiplicative_pair)

__all__ = [
    "CorruptedDataset", "CorruptionModel", "DesignSpec", "GroundTruth", "SimulationConfig",
    "apply_additive_noise", "apply_missing", "apply_multiplicative", "generate_design", "generate_response",
    "generate_sparse_beta", "GraphSpec", "estimate_precision", "generate_graph_precision", "symmetrize_l1op",
    "ProblemSpec", "SolverConfig", "choose_eta", "fit_contraction", "pgd_constrained", "pgd_lagrangian",
    "project_l1", "prox_l1_in_ball", "solve", "ReConstants", "estimate_re_constants", "verify_lower_re",
    "verify_upper_re", "SurrogatePair", "additive_pair", "lasso_pair", "missing_pair", "missing_pair_general",
    "multiplicative_pair",
]
