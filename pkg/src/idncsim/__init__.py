"""Relay-assisted instantly decodable network coding simulator."""

from .cliques import (BudgetExceeded, WeightedGraph, Weighting, assign_weights,
                      mvs_greedy, mwc_exact, select_transmission_clique)
from .graph import (Clique, CodedPacket, IdncGraph, Vertex, apply_reception,
                    build_graph, clique_to_coded_packet,
                    induced_secondary_subgraph)
from .harness import (ExperimentConfig, StatRow, compare_strategies, emit_csv,
                      run_sweep)
from .model import (ConfigurationError, DemandProfile, ErasureMatrix, NodeId,
                    StateFeedbackMatrix, generate_initial_state, wants_union)
from .protocol import (NetworkState, ProtocolConfig, TransmissionRecord,
                       check_step1_termination, run_step1_transmission,
                       run_step2_multi_rn, run_step2_one_rn, run_to_completion)

__all__ = [
    "BudgetExceeded", "Clique", "CodedPacket", "ConfigurationError",
    "DemandProfile", "ErasureMatrix", "ExperimentConfig", "IdncGraph",
    "NetworkState", "NodeId", "ProtocolConfig", "StatRow",
    "StateFeedbackMatrix", "TransmissionRecord", "Vertex", "WeightedGraph",
    "Weighting", "apply_reception", "assign_weights", "build_graph",
    "check_step1_termination", "clique_to_coded_packet", "compare_strategies",
    "emit_csv", "generate_initial_state", "induced_secondary_subgraph",
    "mvs_greedy", "mwc_exact", "run_step1_transmission", "run_step2_multi_rn",
    "run_step2_one_rn", "run_sweep", "run_to_completion",
    "select_transmission_clique", "wants_union",
]

__version__ = "0.1.0"
