"""Bayesian network structure learning with order, partition and iterative MCMC."""

__version__ = "0.1.0"

from .data import DbnLayout, Dataset, ScoreContext, build_score_context, load_dataset
from .errors import BNError, DataError, GraphError, HardLimitError, ScoreError
from .graph import LabelledPartition, dag_to_cpdag, partition_of_dag
from .iterative import IterativeConfig, IterativeResult, itercomp, run_iterative
from .learn import LearnResult, learn
from .order_mcmc import ChainConfig, ChainResult, order_score, run_order_chain
from .partition_mcmc import partition_score, run_partition_chain
from .posterior import (compare_dags, concordance, consensus_model, edge_posterior,
                        edge_posterior_trace, samplecomp)
from .scoring import local_score, simulate_data, total_score
from .search_space import SearchSpace, from_adjacency, full_space, merge_space, pc_skeleton
from .tables import ScoreTableSet, build_tables

__all__ = [
    "BNError", "ChainConfig", "ChainResult", "DataError", "Dataset", "DbnLayout", "GraphError",
    "HardLimitError", "IterativeConfig", "IterativeResult", "LabelledPartition", "LearnResult",
    "ScoreContext", "ScoreError", "ScoreTableSet", "SearchSpace", "build_score_context",
    "build_tables", "compare_dags", "concordance", "consensus_model", "dag_to_cpdag",
    "edge_posterior", "edge_posterior_trace", "from_adjacency", "full_space", "itercomp",
    "learn", "load_dataset", "local_score", "merge_space", "order_score", "partition_of_dag",
    "partition_score", "pc_skeleton", "run_iterative", "run_order_chain", "run_partition_chain",
    "samplecomp", "simulate_data", "total_score",
]
