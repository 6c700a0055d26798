"""Finite-model laboratory for mean metric dimensions of dynamical systems.

The package works with explicit finite models: a point set, a metric, and
a self-map.  On top of the induced iterate (Bowen) metrics it computes
separated/spanning counts, windowed cover costs, the derived dimension
statistics, and measure-based lower-bound certificates.  ``mdimlab.cli``
exposes the same machinery as a command-line runner.
"""

__version__ = "0.1.0"

from .metric import (Ball, BudgetExceeded, DomainError, MetricSystem,
                     ball_members, set_diameter, system_from_points_1d)
from .systems import (KAlphabetSpec, ShiftSpec, build_alphabet_shift,
                      build_full_shift, build_k_shift, build_line,
                      build_product, system_from_config,
                      uniformly_perfect_check)
from .covers import (BallCover, CoverInfeasible, SeparationReport,
                     build_cube_tree, candidate_diameters, max_separated,
                     min_spanning, optimal_cover_cost, realized_distances,
                     sandwich_check, separation_report)
from .dimensions import (AdmissibleFunction, AssouadFit, EvidenceGrid,
                         chain_check, chain_report, dim_eps_H,
                         fixed_diameter_threshold, holder_check,
                         mean_assouad_estimate, mean_hausdorff_estimate,
                         metric_mean_estimate, product_check,
                         psi_intermediate_estimate, psi_monotonicity_check,
                         psi_table, psi_theta, psi_threshold, psi_zero,
                         union_stability_check)
from .measures import (FiniteMeasure, MassDistributionCert,
                       example3_cert, example3_measure, example3_params,
                       frostman_cert, frostman_construct,
                       growth_ball_family, mass_distribution_lower_bound,
                       measure_characterization_bound,
                       uniform_growth_certificate, uniform_measure)

__all__ = [
    "__version__",
    "Ball", "BudgetExceeded", "DomainError", "MetricSystem",
    "ball_members", "set_diameter", "system_from_points_1d",
    "KAlphabetSpec", "ShiftSpec", "build_alphabet_shift", "build_full_shift",
    "build_k_shift", "build_line", "build_product", "system_from_config",
    "uniformly_perfect_check",
    "BallCover", "CoverInfeasible", "SeparationReport", "build_cube_tree",
    "candidate_diameters", "max_separated", "min_spanning",
    "optimal_cover_cost", "realized_distances", "sandwich_check",
    "separation_report",
    "AdmissibleFunction", "AssouadFit", "EvidenceGrid", "chain_check",
    "chain_report", "dim_eps_H", "fixed_diameter_threshold", "holder_check",
    "mean_assouad_estimate", "mean_hausdorff_estimate",
    "metric_mean_estimate", "product_check", "psi_intermediate_estimate",
    "psi_monotonicity_check", "psi_table", "psi_theta", "psi_threshold",
    "psi_zero", "union_stability_check",
    "FiniteMeasure", "MassDistributionCert", "example3_cert",
    "example3_measure", "example3_params", "frostman_cert",
    "frostman_construct", "growth_ball_family",
    "mass_distribution_lower_bound", "measure_characterization_bound",
    "uniform_growth_certificate", "uniform_measure",
]
