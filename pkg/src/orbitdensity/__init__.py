"""Exact return-time density experiments for weighted backward shift orbits.

Builds an orbit vector for the weighted backward shift whose visit times to
an open half-space provably oscillate between two distinct density values
along a dyadic checkpoint subsequence, and verifies every quantitative
ingredient (interval combinatorics, exact rational limits, certified norm
bounds) at desk scale.
"""

from .densities import (
    ALL_INTEGERS,
    EMPTY_SET,
    DensityReport,
    IntegerSetView,
    count_up_to,
    density_ratios,
    from_members,
    upper_banach_density_estimate,
)
from .dyadic import (
    CLASS1,
    CLASS2,
    BlockInterval,
    CheckReport,
    Checkpoints,
    SeparationParams,
    checkpoint_schedule,
    checkpoints_between,
    count_sites,
    in_site_pool,
    in_site_set,
    min_alignment_exponent,
    nearest_site_distance,
    scale_index,
    scale_mass,
    scale_mass_limit,
    site_members,
    site_pool_members,
    site_set_view,
    strip,
    strip_sites,
    verify_checkpoint_gap,
    verify_separation,
)
from .scalars import GaussianRational
from .shift import (
    SUP,
    Functional,
    LazyVector,
    NormEstimate,
    ShiftOperator,
    apply_power,
    chain_vector,
    check_tail_bound,
    functional_eval,
    tail_constant,
    vector_norm,
    verify_chain_spans,
)
from .vector import (
    AssembledVector,
    CoefficientBlock,
    DensityExperiment,
    LevelBudgets,
    ReturnSet,
    SeriesOracle,
    approach_bound,
    build_level_budgets,
    checkpoint_count,
    dense_family_blocks,
    density_experiment,
    expansion_coefficient,
    one_block_family,
    orbit_functional,
    predicted_density_limits,
    return_set,
    sign_cross_check,
    site_hit_count,
    verify_orbit_approach,
    zero_block,
)

__version__ = "0.1.0"
