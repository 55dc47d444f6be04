"""Cournot-Nash equilibria for games with a continuum of players, computed
through the level-set structure of multi-to-one optimal transport.

The package ships three cross-validating solvers (congestion fixed point,
best-reply iteration, generalized Sinkhorn), an exact LP oracle with dual
certificates, nestedness diagnostics, and a line-integral consistency check
of the converged densities.  Estimator-style wrappers in
:mod:`cournot.estimators` expose the solvers through a fit/predict API, and
the ``cournot`` command line runs the shipped experiment presets.
"""

from .bestreply import (
    InteractionSpec,
    best_reply_point,
    push_forward,
    quadratic_interaction_spec,
    solve_bestreply,
)
from .congestion import (
    CongestionSpec,
    SolverConfig,
    congestion_update,
    optimality_residual,
    solve_congestion,
)
from .costs import (
    ArcPowerCost,
    ArcQuadraticCost,
    CostModel,
    check_derivatives,
    cost_from_config,
)
from .estimators import (
    BestReplyEquilibrium,
    CongestionEquilibrium,
    SinkhornEquilibrium,
    as_point_cloud,
)
from .lp import LPResult, lp_transport_on_grid, solve_exact_ot
from .measures import (
    DegenerateMeasureError,
    Grid1D,
    GridMeasure1D,
    GridMismatchError,
    PointCloudMeasure,
    QuarterDiskSampler,
    deposit,
    normalize,
    quarter_disk,
    uniform_measure,
    wasserstein1_1d,
)
from .monge_ampere import (
    SingularityError,
    level_curve,
    ma_density,
    ma_residual,
    quarter_disk_density,
)
from .nestedness import (
    NestednessReport,
    SufficiencyReport,
    check_nestedness,
    k_max,
    minimal_mass_difference,
    sufficient_nestedness,
)
from .presets import PRESETS, available_presets, expand_config, get_preset
from .results import EquilibriumResult
from .sinkhorn import (
    GibbsKernel,
    dual_objective,
    solve_sinkhorn,
    u_update,
    v_update_congestion,
    v_update_interaction,
    v_update_marginal,
)
from .transport import (
    AssignmentMap,
    LevelProfile,
    assign_map,
    kantorovich_potential_pair,
    level_profile,
    map_coupling,
    solve_k,
    superlevel_mass,
    transport_cost,
)

__version__ = "0.1.0"

__all__ = [
    "ArcPowerCost",
    "ArcQuadraticCost",
    "AssignmentMap",
    "BestReplyEquilibrium",
    "CongestionEquilibrium",
    "CongestionSpec",
    "CostModel",
    "DegenerateMeasureError",
    "EquilibriumResult",
    "GibbsKernel",
    "Grid1D",
    "GridMeasure1D",
    "GridMismatchError",
    "InteractionSpec",
    "LPResult",
    "LevelProfile",
    "NestednessReport",
    "PRESETS",
    "PointCloudMeasure",
    "QuarterDiskSampler",
    "SingularityError",
    "SinkhornEquilibrium",
    "SolverConfig",
    "SufficiencyReport",
    "as_point_cloud",
    "assign_map",
    "available_presets",
    "best_reply_point",
    "check_derivatives",
    "check_nestedness",
    "congestion_update",
    "cost_from_config",
    "deposit",
    "dual_objective",
    "expand_config",
    "get_preset",
    "k_max",
    "kantorovich_potential_pair",
    "level_curve",
    "level_profile",
    "lp_transport_on_grid",
    "ma_density",
    "ma_residual",
    "map_coupling",
    "minimal_mass_difference",
    "normalize",
    "optimality_residual",
    "push_forward",
    "quadratic_interaction_spec",
    "quarter_disk",
    "quarter_disk_density",
    "solve_bestreply",
    "solve_congestion",
    "solve_exact_ot",
    "solve_k",
    "solve_sinkhorn",
    "sufficient_nestedness",
    "superlevel_mass",
    "transport_cost",
    "u_update",
    "uniform_measure",
    "v_update_congestion",
    "v_update_interaction",
    "v_update_marginal",
    "wasserstein1_1d",
]
