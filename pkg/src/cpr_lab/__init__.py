"""Stable recovery of complex sparse signals from phaseless Gaussian measurements.

Measurement ensembles, empirical isometry checks over rank-2 sparse Hermitian
matrices, convex sparse decompositions, stability-bound formulas and a
sparse recovery solver, plus the ``cpr-lab`` experiment CLI.
"""
from ._kernels import BACKEND
from .bounds import RipConstants, c1, check_condition, stability_bounds
from .core import aligned_distance, dist_matrix, frobenius_norm, lift, phase_align, row_sparsity
from .measure import MeasurementEnsemble, apply_map_matrix, apply_map_signal, sample_ensemble
from .ripcheck import estimate_rip, realize, sample_X
from .solver import SolverConfig, recover

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "MeasurementEnsemble",
    "RipConstants",
    "SolverConfig",
    "aligned_distance",
    "apply_map_matrix",
    "apply_map_signal",
    "c1",
    "check_condition",
    "dist_matrix",
    "estimate_rip",
    "frobenius_norm",
    "lift",
    "phase_align",
    "realize",
    "recover",
    "row_sparsity",
    "sample_X",
    "sample_ensemble",
    "stability_bounds",
]
