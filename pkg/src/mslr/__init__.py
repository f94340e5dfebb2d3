"""Multi-scale low rank matrix decomposition."""

from .analysis import (BlockSubspaces, certificate_check, check_balance, coherence_estimate,
                       project_T, project_T_perp, rmse, subspaces_from_components)
from .matrix import axpby, load_matrix, save_matrix
from .partition import (MultiScalePartition, PartitionSpec, Scale, build_partition,
                        cyclic_shift, cyclic_unshift, draw_shift, embed_block, extract_block,
                        partition_from_sizes)
from .regularization import gaussian_complexity_estimate, lambda_for_scale, recommended_lambdas
from .solver import (DecompositionResult, SolverConfig, SolverState, admm_step, complete,
                     decompose, objective)
from .spectral import (block_svt, scale_dual_norm, scale_norm, sigma_max_upper_bound, svd,
                       svt)

__version__ = "0.1.0"
