"""Formal Kashiwara-Vergne series in two letters and matrix commutator certificates."""
from .bch import bch_series, fg_series, kv1_check, kveasy_ab
from .config import RunConfig, __version__
from .constructions import (
    FactorCertificate,
    commutator_to_squarezeros,
    dhs_kernel_check,
    exp_commutator_factor,
    selfcomm_to_projections,
    sumof5,
    unipotent_factor,
)
from .free_algebra import GradedSeries, LieSeries, X, Y, bracket, dsw_project, evaluate, is_lie, multiply, scale
from .kv_flow import KVSolution, rs_decompose, solve_rs, verify_factorization
from .verifier import verify_certificate

__all__ = [
    "FactorCertificate", "GradedSeries", "KVSolution", "LieSeries", "RunConfig", "X", "Y",
    "__version__", "bch_series", "bracket", "commutator_to_squarezeros", "dhs_kernel_check",
    "dsw_project", "evaluate", "exp_commutator_factor", "fg_series", "is_lie", "kv1_check",
    "kveasy_ab", "multiply", "rs_decompose", "scale", "selfcomm_to_projections", "solve_rs",
    "sumof5", "unipotent_factor", "verify_certificate", "verify_factorization",
]
