"""Covariance estimation toolkit for heavy-tailed random vectors."""

from .covariance import (SampleSet, estimation_error, large_coeff_set, load_samples,
                         orthogonality_profile, sample_covariance, save_samples,
                         subgaussian_predicted_error, subset_norm_sweep, truncation_split,
                         weak_l2_profile)
from .decoupling import (DecouplingCertificate, DecouplingParams, check_decoupling, decouple,
                         maurey_select, separation_witness)
from .distributions import (Frame, MomentCertificate, VectorModel, certify_moments,
                            make_tight_frame, model_covariance, parseval_defect, sample)
from .errors import ContractError, ConvergenceError, DecouplingFailure, StructureError
from .experiments import ExperimentConfig, ResultRow, fit_exponent
from .hull import min_norm_point
from .linalg import extreme_eigs, op_norm
from .nets import EpsNet, epsilon_net, net_norm_estimate
from .sequences import lp_norm, order_stat_bound, rearrange_desc, weak_lp_norm
from .structure import (StructureConstants, block_decompose, check_structure,
                        extract_structure, refine_structure, regularize)

__version__ = "0.1.0"
