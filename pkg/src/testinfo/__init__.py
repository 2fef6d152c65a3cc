"""Bayesian test-information criteria for experimental design."""

from .bayes_factor import (BayesFactorResult, bf_laplace, bf_linear_gaussian,
                           bf_monte_carlo, compute_log_bf, lr_mle_plugin)
from .criteria import (AppendixBReport, CriterionEstimate, FisherInfo,
                       FractionResult, Theorem1Row, appendix_b_example,
                       box_hill, conditional_test_info, conditional_tk,
                       d_conditional, d_criterion, expected_test_info,
                       fisher_fraction, fraction_observed, prior_mean_power,
                       ri1, theorem1_check, tk_closed_form)
from .evidence import (EvidenceFunction, SymmetryCheck, check_concavity,
                       check_symmetry, conversion_number, evidence_from_config)
from .models import (BinaryHypothesis, BinaryRegressionModel, Design,
                     FitResult, LinearGaussianModel, LinearHypothesis,
                     TwoHypothesisProblem, link_inverse, log_likelihood,
                     mle_fit, simulate)
from .optimizer import (CandidateGrid, SearchResult, constrained_select,
                        exchange_optimize)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
