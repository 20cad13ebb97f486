"""Federated transfer learning for sparse high-dimensional generalized linear models."""
from .glm import GAUSSIAN, LOGISTIC, PartitionedDataset, get_family, gradient, hessian, neg_log_lik
from .solver import solve_l1, soft_threshold, hard_threshold_topk
from .federation import Network, SiteNode
from .estimators import (
    EstimatorConfig,
    aggregate,
    fed_target_only,
    fed_transfer_alg1,
    fed_transfer_alg2,
    initialize,
    pooled_transfer,
    theory_penalties,
)
from .simulate import SimConfig, build_federated_scenario
from .experiment import ExperimentConfig, run_experiment

__version__ = "0.1.0"
