"""Exact waiting-time statistics for quantum repeater chains.

Builds absorbing Markov chains for repeater protocols with probabilistic
entanglement swapping, extracts waiting-time distributions and moments from
them, compresses large chains through lumpable symmetries, and checks
everything against closed forms and Monte Carlo simulation.
"""

from .chain import (
    AbsorbingChain,
    EdgeMark,
    RepeaterParams,
    SchemeTree,
    SizeCapError,
    SolveError,
    UnsupportedSchemeError,
    WaitingStats,
    enumerate_full_states,
    load_chain,
    swapped_label,
    validate_chain,
)
from .builders import (
    build_asymmetric_deterministic,
    build_deterministic,
    build_dynamical,
    build_finite_memory_deterministic,
    build_fixed_scheme,
    build_single_segment,
    build_two_segment_cutoff,
    build_two_segment_with_swap_state,
    combine_fixed,
    double_with_cc,
    doubling_with_cc,
)
from .analysis import (
    dominant_eigenvalue,
    edge_expected_counts,
    expected_visits,
    geometric_tail,
    mean_absorption,
    pgf_eval,
    second_moment,
    variance,
    waiting_pdf,
    waiting_stats,
)
from .lumping import (
    LumpabilityError,
    MomentStats,
    Partition,
    compound_doubling_stats,
    deterministic_lumped,
    doubling_lumped,
    doubling_state_count,
    doubling_stats,
    doubling_stats_matrix_free,
    lump,
)
from .closedforms import (
    approx_doubling,
    asymmetric_mean,
    harmonic_approx,
    k2_cutoff,
    kn_det,
    kn_det_cutoff,
    nested_approx,
    relative_error,
    small_repeater_mean,
    transmission_probability,
)
from .montecarlo import MCEstimate, estimate, simulate_once

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
