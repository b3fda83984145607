"""bdnet: discrete Bayesian networks learned from tabular data.

Structure learning (BIC hill climbing with bootstrap majority voting),
exact clique-tree inference, rejection-sampling estimates with repeat-based
confidence, and decision networks that rank actions by expected utility.
"""

from .decision import (
    DecisionNetwork,
    ImpossibleActionError,
    PolicyDecision,
    PolicyRow,
    PolicyTable,
    UtilitySpec,
    expected_utility,
    extend,
    gibbs_policy,
    optimal_policy,
    policy_table,
)
from .discretize import (
    CascadeExhaustedError,
    ConstantColumnError,
    DiscretizationSpec,
    apply_spec,
    discretize_column,
    kmeans_1d,
)
from .inference import (
    AcceptanceFailureError,
    CliqueTree,
    Distribution,
    EvidenceSet,
    ImpossibleEvidenceError,
    TreewidthLimitError,
    compile_clique_tree,
    forward_sample,
    posterior,
    prior_marginal,
    query_batch,
    rejection_sample,
    sample_frame,
)
from .ingest import (
    ColumnTypeError,
    CsvParseError,
    DerivedColumn,
    MergeKeyError,
    RawTable,
    SchemaError,
    UnimputableColumnError,
    derive,
    impute,
    load_csv,
    merge,
    parse_derived_spec,
)
from .model import (
    Cpt,
    CyclicGraphError,
    Dag,
    DiscreteNetwork,
    InvalidAssignmentError,
    Variable,
    joint_probability,
    topological_order,
    validate_network,
)
from .structure import (
    CategoricalData,
    ConstraintError,
    EdgeConstraints,
    EnsembleResult,
    ScoredDag,
    bic_family_score,
    bic_score,
    bootstrap_ensemble,
    fit_cpts,
    hill_climb,
    majority_vote,
)

__version__ = "0.1.0"

__all__ = [
    "AcceptanceFailureError",
    "CascadeExhaustedError",
    "CategoricalData",
    "CliqueTree",
    "ColumnTypeError",
    "ConstantColumnError",
    "ConstraintError",
    "Cpt",
    "CsvParseError",
    "CyclicGraphError",
    "Dag",
    "DecisionNetwork",
    "DerivedColumn",
    "DiscreteNetwork",
    "DiscretizationSpec",
    "Distribution",
    "EdgeConstraints",
    "EnsembleResult",
    "EvidenceSet",
    "ImpossibleActionError",
    "ImpossibleEvidenceError",
    "InvalidAssignmentError",
    "MergeKeyError",
    "PolicyDecision",
    "PolicyRow",
    "PolicyTable",
    "RawTable",
    "SchemaError",
    "ScoredDag",
    "TreewidthLimitError",
    "UnimputableColumnError",
    "UtilitySpec",
    "Variable",
    "apply_spec",
    "bic_family_score",
    "bic_score",
    "bootstrap_ensemble",
    "compile_clique_tree",
    "derive",
    "discretize_column",
    "expected_utility",
    "extend",
    "fit_cpts",
    "forward_sample",
    "gibbs_policy",
    "hill_climb",
    "impute",
    "joint_probability",
    "kmeans_1d",
    "load_csv",
    "majority_vote",
    "merge",
    "optimal_policy",
    "parse_derived_spec",
    "policy_table",
    "posterior",
    "prior_marginal",
    "query_batch",
    "rejection_sample",
    "sample_frame",
    "topological_order",
    "validate_network",
]
