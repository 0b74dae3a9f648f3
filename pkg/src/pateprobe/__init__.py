"""Simulation and inversion of PATE's Gaussian noisy-argmax aggregation.

The library covers four pieces: the mechanism itself (noisy argmax over
teacher vote histograms), the closed-form distribution of its answers
with an analytic Jacobian, the black-box attack that reconstructs the
hidden histogram from repeated queries, and Renyi-DP accounting of what
those queries cost. A consensus-threshold classifier turns recovered
histograms into minority-group guesses.
"""

from .attribute import (
    AttributeMetrics,
    Group,
    LabeledHistogram,
    SynthPopulationSpec,
    classify_by_consensus,
    evaluate,
    generate_population,
)
from .core import (
    ConsensusGroup,
    OutcomeDistribution,
    RealHistogram,
    VoteHistogram,
    consensus,
    l1_error,
    shift_to_total,
    tertile_split,
)
from .fixtures import FIXTURE_DATASETS, load_fixtures
from .io import (
    read_histograms,
    read_labeled_histograms,
    write_histograms,
    write_labeled_histograms,
)
from .mechanism import NoiseSpec, QuerySample, aggregate, sample
from .outcome import (
    IntegrationGrid,
    OutcomeModel,
    gaussian_cdf,
    gaussian_pdf,
    outcome_distribution,
    outcome_jacobian,
)
from .privacy import (
    DEFAULT_ALPHA_GRID,
    PrivacyAccount,
    PrivacyParams,
    account,
    compose,
    max_queries_within_budget,
    rdp_per_query,
    to_eps_delta,
)
from .reconstruct import (
    InitMode,
    MonteCarloEstimate,
    OptimizerConfig,
    ReconstructionResult,
    StopMode,
    StopReason,
    estimate_distribution,
    loss,
    reconstruct,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeMetrics",
    "ConsensusGroup",
    "DEFAULT_ALPHA_GRID",
    "FIXTURE_DATASETS",
    "Group",
    "InitMode",
    "IntegrationGrid",
    "LabeledHistogram",
    "MonteCarloEstimate",
    "NoiseSpec",
    "OptimizerConfig",
    "OutcomeDistribution",
    "OutcomeModel",
    "PrivacyAccount",
    "PrivacyParams",
    "QuerySample",
    "RealHistogram",
    "ReconstructionResult",
    "StopMode",
    "StopReason",
    "SynthPopulationSpec",
    "VoteHistogram",
    "account",
    "aggregate",
    "classify_by_consensus",
    "compose",
    "consensus",
    "estimate_distribution",
    "evaluate",
    "gaussian_cdf",
    "gaussian_pdf",
    "generate_population",
    "l1_error",
    "load_fixtures",
    "loss",
    "max_queries_within_budget",
    "outcome_distribution",
    "outcome_jacobian",
    "read_histograms",
    "read_labeled_histograms",
    "reconstruct",
    "rdp_per_query",
    "sample",
    "shift_to_total",
    "tertile_split",
    "to_eps_delta",
    "write_histograms",
    "write_labeled_histograms",
]
