"""Audit belief-updating rules against the Blackwell informativeness order.

The package decides whether a (prior-parametric) belief-updating rule can
strictly prefer less information, classifies its deviations from Bayesian
updating, and synthesizes independently verifiable counterexamples:
pairs of garbling-ordered experiments plus a decision problem under
which the rule's expected welfare drops when information improves.
"""

from .geometry import (
    Belief,
    EmptyInput,
    Face,
    Hyperplane,
    NoStrictSeparation,
    affinely_independent,
    enumerate_faces,
    face_samples,
    in_convex_hull,
    interior_lattice,
    on_segment,
    separating_hyperplane,
    separating_hyperplane_sets,
    simplex_lattice,
    uniform_belief,
    vertex_belief,
)
from .experiments import (
    BarycenterMismatch,
    DimensionMismatch,
    Experiment,
    GarblingMatrix,
    InfeasibleWeights,
    NotAffinelyIndependent,
    PosteriorDistribution,
    PriorNotInterior,
    TargetOutsideOppositeHull,
    bayes,
    binary_symmetric,
    blackwell_dominates,
    bring_point_in,
    experiment_from_posteriors,
    fully_informative,
    garble,
    is_mpc,
    point_mass,
    uninformative,
)
from .distortions import (
    BayesRule,
    CoarseRule,
    CoarseVerdict,
    Distortion,
    ErrorClass,
    GretherRule,
    GridMiss,
    ShrinkageRule,
    StubbornRule,
    StubbornSpec,
    StubbornVerdict,
    TabulatedRule,
    TrivialRule,
    WrongDimension,
    classify_batch,
    classify_error,
    evaluate,
    evaluate_batch,
    is_affine,
    is_occasionally_coarse,
    is_occasionally_stubborn,
    is_trivial_on_interior,
    parse_rule,
    pushforward,
    random_rule,
    rule_from_json,
    stubborn_example_a,
    stubborn_example_b,
)
from .decision import (
    ConvexityViolation,
    DecisionProblem,
    Selector,
    SelectorPolicy,
    ValueResult,
    WelfareMode,
    convexity_violations,
    expected_payoff,
    quadratic_loss_problem,
    select_action,
    value_function,
    welfare,
    welfare_batch,
)
from .auditor import (
    AuditReport,
    BudgetExhausted,
    ViolationCertificate,
    audit,
    audit_contractive,
    audit_expansive,
    hyperplane_problem,
    verify_certificate,
)

__version__ = "0.1.0"
