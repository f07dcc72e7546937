"""Strongly chi-square-private data disclosure: design, audit, search.

The package designs disclosure mechanisms that maximize the information
revealed about a useful variable while keeping every posterior of the
private variable inside a chi-square ball around its prior, and it ships
the independent exhaustive/randomized searches used to validate the
closed-form designs.
"""

__version__ = "0.1.0"

from .adversary import (
    AdversaryDesignReport,
    BinaryChannel,
    design_adversarial_mechanism,
    induced_u_constraint,
    invert_binary_channel,
)
from .designer import (
    DesignMatrix,
    DesignReport,
    EpsilonBounds,
    Mechanism,
    PerturbationDirection,
    build_w,
    decompose,
    derive_px,
    design_mechanism,
    deterministic_svd,
    epsilon_bounds,
    principal_direction,
    spectral_tightness,
)
from .errors import (
    Chi2MechError,
    InfeasibleEpsilonError,
    NumericalError,
    ScenarioError,
    SingularMatrixError,
    ValidationError,
)
from .infometrics import (
    chi2_divergence,
    chi2_information,
    error_probability,
    kl_divergence,
    mmse_binary,
    mutual_information,
    to_bits,
)
from .oracle import (
    BinaryGridSearch,
    GridSearchResult,
    exact_binary_search,
    randomized_search,
    taylor_residual_scan,
)
from .probability import ChannelMatrix, JointDistribution, ProbVector
from .provider import (
    ProviderReport,
    ProviderScenario,
    build_factors,
    design_provider_mechanism,
)
from .scenario import Scenario, bsc_matrix, load_scenario, parse_scenario

__all__ = [
    "AdversaryDesignReport",
    "BinaryChannel",
    "BinaryGridSearch",
    "ChannelMatrix",
    "Chi2MechError",
    "DesignMatrix",
    "DesignReport",
    "EpsilonBounds",
    "GridSearchResult",
    "InfeasibleEpsilonError",
    "JointDistribution",
    "Mechanism",
    "NumericalError",
    "PerturbationDirection",
    "ProbVector",
    "ProviderReport",
    "ProviderScenario",
    "Scenario",
    "ScenarioError",
    "SingularMatrixError",
    "ValidationError",
    "bsc_matrix",
    "build_factors",
    "build_w",
    "chi2_divergence",
    "chi2_information",
    "decompose",
    "derive_px",
    "design_adversarial_mechanism",
    "design_mechanism",
    "design_provider_mechanism",
    "deterministic_svd",
    "epsilon_bounds",
    "error_probability",
    "exact_binary_search",
    "induced_u_constraint",
    "invert_binary_channel",
    "kl_divergence",
    "load_scenario",
    "mmse_binary",
    "mutual_information",
    "parse_scenario",
    "principal_direction",
    "randomized_search",
    "spectral_tightness",
    "taylor_residual_scan",
    "to_bits",
]
