"""Flow-based community detection with regularized walk dynamics.

The pipeline: parse a network, pick a method tag to regularize its walk
dynamics, minimize the two-level codelength, then use the coding tree to
score node pairs for link prediction or compare partitions.
"""

from .codelength import (
    FlowSystem,
    ModuleFlows,
    PartitionState,
    delta_move,
    flow_system,
    module_flows,
    one_level_codelength,
    plogp,
    two_level_codelength,
)
from .flow import (
    ConvergenceError,
    FlowModel,
    build_flow_model,
    config_model_factor,
    config_model_weight,
    empirical_model,
    prior_strength,
    prior_weight,
    regularized_transitions,
    visit_rates,
)
from .graph import Network, ParseError, parse_edge_list, to_edge_list
from .experiment import (
    ExperimentRecord,
    Split,
    nontrivial_stats,
    read_records_csv,
    records_to_csv,
    run_experiment,
    sample_nonlinks,
    split_links,
    stable_seed,
    summarize_records,
)
from .metrics import adjusted_mutual_info, auc_score, bootstrap_ci, mean_rank
from .methods import METHODS, canonical_method, make_model
from .optimize import SearchConfig, aggregate, local_move_pass, optimize
from .overlays import (
    WeightOverlay,
    combine_overlays,
    common_neighbors_overlay,
    mixed_markov_overlay,
    variable_markov_overlay,
)
from .similarity import SimilarityScore, mapsim_bits, rank_candidates, score_pairs
from .tree import (
    CodingTree,
    TreeModule,
    build_two_level_tree,
    tree_from_json,
    tree_to_json,
    tree_to_text,
)

__version__ = "0.1.0"

__all__ = [
    "CodingTree",
    "ConvergenceError",
    "ExperimentRecord",
    "FlowModel",
    "FlowSystem",
    "METHODS",
    "ModuleFlows",
    "Network",
    "ParseError",
    "PartitionState",
    "SearchConfig",
    "SimilarityScore",
    "Split",
    "TreeModule",
    "WeightOverlay",
    "adjusted_mutual_info",
    "aggregate",
    "auc_score",
    "bootstrap_ci",
    "build_flow_model",
    "build_two_level_tree",
    "canonical_method",
    "combine_overlays",
    "common_neighbors_overlay",
    "config_model_factor",
    "config_model_weight",
    "delta_move",
    "empirical_model",
    "flow_system",
    "local_move_pass",
    "make_model",
    "mapsim_bits",
    "mean_rank",
    "mixed_markov_overlay",
    "module_flows",
    "nontrivial_stats",
    "one_level_codelength",
    "optimize",
    "parse_edge_list",
    "plogp",
    "prior_strength",
    "prior_weight",
    "rank_candidates",
    "read_records_csv",
    "records_to_csv",
    "regularized_transitions",
    "run_experiment",
    "sample_nonlinks",
    "score_pairs",
    "split_links",
    "stable_seed",
    "summarize_records",
    "to_edge_list",
    "tree_from_json",
    "tree_to_json",
    "tree_to_text",
    "two_level_codelength",
    "variable_markov_overlay",
    "visit_rates",
]
