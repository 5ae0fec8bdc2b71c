"""Assisted quantum secret sharing: analysis, construction, and verification.

Any monotone access structure -- even one with disjoint authorized groups,
which no-cloning forbids for conventional quantum secret sharing -- can be
realized once the dealer withholds a few shares.  This package computes how
many (the clique cover number of the overlap graph, minus one), builds the
recursive threshold scheme that achieves it, and certifies recoverability
and privacy by exact qudit state-vector simulation.
"""

from .access import (
    AccessStructure,
    canonical_text,
    check_pairwise_overlap,
    format_player_set,
    is_authorized,
    maximal_structure,
    maximal_unauthorized_sets,
    parse_access_structure,
    reduce_to_minimal,
    restrict,
)
from .engine import (
    DEFAULT_AMPLITUDE_CAP,
    DensityOperator,
    FieldSpec,
    QuditRegister,
    ShareMap,
    basis_register,
    choose_field,
    decode_threshold,
    encode_additive,
    encode_polynomial,
    encode_tree,
    entangle_with_reference,
    max_entangled_fidelity,
    partial_trace,
    permute_subsystems,
    product_trace_distance,
    reconstruct_tree,
    trace_distance,
)
from .errors import (
    AqssError,
    CapExceededError,
    DegenerateRestrictionError,
    InsufficientSharesError,
    OverlapViolationError,
    ParseError,
    ResourceCapError,
    UnsupportedStructureError,
)
from .linkage import (
    ASGraph,
    PartialLinkClassification,
    build_as_graph,
    component_count,
    compute_lambda,
    enumerate_min_clique_covers,
    exact_min_clique_cover,
    greedy_clique_cover,
    validate_classification,
)
from .scheme import (
    PlayerLeaf,
    ResidentLeaf,
    SchemeNode,
    ThresholdNode,
    ThresholdParams,
    TrivialEmbeddingAnalysis,
    analyze_trivial_embedding,
    build_class_scheme,
    build_scheme,
    detect_threshold_structure,
    find_threshold_completion,
    iter_leaves,
    player_leaf_count,
    render_dot,
    resident_share_count,
    tree_from_dict,
    tree_to_dict,
)
from .verify import (
    ImportanceEntry,
    PrivacyEntry,
    RecoverabilityEntry,
    VerificationReport,
    check_importance,
    decoupling_recoverable,
    verify_privacy,
    verify_recoverability,
    verify_scheme,
)

__version__ = "0.1.0"
