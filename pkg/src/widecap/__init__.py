"""Capacity bounds of non-coherent wideband MIMO channels over bandwidth occupancy.

The package computes the closed-form achievable-rate bounds of peaky/non-peaky
signaling as functions of the bandwidth occupancy delta*B, locates the optimal
and critical occupancies, evaluates the sublinear-exponent brackets of the
polynomial capacity expansion, and verifies the underlying algebra by seeded
Monte-Carlo simulation of discrete block-fading channels.
"""

from .bounds import (
    AlphaBracket,
    BoundsReport,
    CriticalBracket,
    alpha_brackets,
    bounds_report,
    coherence_requirement,
    critical_bracket,
    epsilon_for_error_pct,
    optimal_occupancy,
    peak_gap,
    rate_lower_bound,
    rate_upper_bound,
    sublinear_rate_bound,
)
from .channel import (
    DiscreteChannel,
    FilterBankCodeword,
    PilotCirculant,
    block_idft_matrix,
    circulant_eigenvalues,
    filterbank_equivalence_check,
    frequency_response,
    sample_taps,
)
from .mcverify import McConfig, McEstimate, run_verification_suite
from .scenario import (
    ChannelScenario,
    FadingFamily,
    OccupancyPoint,
    ParseError,
    ScenarioError,
    ValidationError,
    kurtosis,
    parse_scenario,
    serialize_scenario,
    snr_per_dof,
)

__version__ = "0.1.0"
