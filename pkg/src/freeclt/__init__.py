"""Diagram-formula cumulants and central limit checks for functionals of stationary
Gaussian and semicircular sequences."""

from .breaking import (
    BreakingGraph,
    LinearProcessSpec,
    alpha_G,
    build_breaking_graph,
    slope_experiment,
    spectral_cumulant_linear,
    theorem53_check,
    verify_spectral_representation,
)
from .covariance import CovarianceModel, functional_covariance, psd_check, sigma_squared, summability_check
from .diagram import (
    CumulantRequest,
    J_N,
    cumulant_scan,
    joint_cumulant,
    joint_moment_free,
    kappa2_SN_closed,
    kappa_R_SN,
)
from .oracle import oracle_cumulant
from .orthopoly import Basis, FunctionalSeries, chebyshev_eval, expand, hermite_eval, rank
from .partitions import Partition, RowTable
from .simulate import (
    ma_coefficients,
    mc_distribution,
    rmt_clt_check,
    sample_gaussian_path,
    stieltjes_empirical,
    stieltjes_semicircle,
)

__version__ = "0.1.0"
