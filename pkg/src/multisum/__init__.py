"""Moment and tail bounds for multi-indexed sums of degenerate kernels,
with seeded Monte Carlo verification of their Gaussian-chaos limit laws."""

from .psi import (PsiFunction, MomentCurve, TailBound, SupportError,
                  power_log, extremal, bounded_support, exp_power,
                  product_of, rosenthal_scaled, tabulated_psi,
                  eval_psi, gls_norm, natural_psi, young_fenchel,
                  tail_bound_eval, compose_psi_product,
                  psi_to_json, psi_from_json)
from .rosenthal import (ROSENTHAL_CONSTANT, ROSENTHAL_ARGMAX_P, rosenthal_K,
                        trivial_bound, klesov_bound, dp_quasinorm,
                        theorem_W_bound, BoundReport)
from .kernels import (FactorFamily, DegenerateKernel, TabulatedKernel,
                      ApproxResult, hermite_family, rademacher_family,
                      poisson_charlier_family, exponential_poly_family,
                      tabulated_family, eval_kernel, kernel_moment_curve,
                      spectral_decompose, degenerate_approx,
                      kernel_to_json, kernel_from_json, quadrature_rule)
from .index_sets import (IndexSet, Rect, RectPair, make_rect, staircase_set,
                         explicit_set, best_inscribed_rect, circumscribed_rect,
                         rect_pair, nclt_condition_report, ConditionReport,
                         squares_family, squares_minus_corner_family,
                         lshape_family)
from .mc import (RngSpec, AxisDistribution, EmpiricalDist, compute_S_L,
                 naive_S_L, simulate_S_L, sample_S_infty, empirical_moment,
                 empirical_tail, save_empirical, load_empirical)
from .verify import (ks_distance, ks_critical, ConvergenceReport,
                     SandwichReport, TailDominationReport, verify_rect_nclt,
                     verify_irregular_nclt, verify_moment_sandwich,
                     verify_tail_domination, natural_composite,
                     factor_moment_under)
from .parametric import (ParametricKernel, EntropyProfile, IntegralResult,
                         sigma_lambda, rho_lambda, covering_profile,
                         entropy_integral_power, entropy_integral_exp,
                         simulate_Q_L, check_theorem_8, Theorem8Report)

__version__ = "0.1.0"
