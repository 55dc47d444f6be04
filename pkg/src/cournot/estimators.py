"""Estimator-style front end for the equilibrium solvers.

Each estimator follows the scikit-learn protocol: hyperparameters in
``__init__`` (so ``get_params``/``set_params``/``clone`` work), data in
``fit(X, sample_weight=...)`` where ``X`` holds one agent type per row,
fitted state in trailing-underscore attributes, and ``predict(X)`` mapping
agent types to equilibrium strategies.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .bestreply import (
    InteractionSpec,
    _bisect_replies,
    _reply_derivative_factory,
    quadratic_interaction_spec,
    solve_bestreply,
)
from .congestion import CongestionSpec, SolverConfig, solve_congestion
from .costs import ArcQuadraticCost, CostModel
from .measures import Grid1D, GridMeasure1D, PointCloudMeasure, uniform_measure
from .sinkhorn import solve_sinkhorn
from .transport import _first_crossing

__all__ = [
    "BestReplyEquilibrium",
    "CongestionEquilibrium",
    "SinkhornEquilibrium",
    "as_point_cloud",
]


def as_point_cloud(X, sample_weight=None) -> PointCloudMeasure:
    """Validate an ``(M, 2)`` array of agent types and optional nonnegative
    weights (normalized to total mass one; uniform when omitted)."""
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != 2:
        raise ValueError(
            f"agent types must have two coordinates, got {X.shape[1]}"
        )
    m = X.shape[0]
    if sample_weight is None:
        w = np.full(m, 1.0 / m)
    else:
        w = check_array(sample_weight, ensure_2d=False, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != m:
            raise ValueError("sample_weight must be one value per row of X")
        if np.any(w < 0):
            raise ValueError("sample_weight must be nonnegative")
        total = float(w.sum())
        if not total > 0:
            raise ValueError("sample_weight must have positive total mass")
        w = w / total
    return PointCloudMeasure(points=X, weights=w)


class _EquilibriumEstimator(BaseEstimator):
    """Shared plumbing: grid construction, cost resolution, fit bookkeeping."""

    def _resolved_cost(self) -> CostModel:
        if self.cost is None:
            return ArcQuadraticCost()
        if not isinstance(self.cost, CostModel):
            raise TypeError("cost must be a CostModel instance or None")
        return self.cost

    def _make_grid(self) -> Grid1D:
        return Grid1D(self.y_min, self.y_max, self.n_cells)

    def _make_nu0(self, grid: Grid1D) -> GridMeasure1D:
        support = getattr(self, "nu0_support", None)
        if support is None:
            return uniform_measure(grid)
        lo, hi = support
        return uniform_measure(grid, support=(float(lo), float(hi)))

    def _solver_config(self) -> SolverConfig:
        return SolverConfig(
            max_iters=self.max_iters,
            tol_l1=self.tol_l1,
            damping=self.damping,
        )

    def _store(self, cloud: PointCloudMeasure, grid: Grid1D, result):
        self.n_features_in_ = 2
        self.cloud_ = cloud
        self.grid_ = grid
        self.result_ = result
        self.nu_ = result.nu
        self.density_ = result.nu.density.copy()
        self.profile_ = result.profile
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.residual_ = result.residual

    def _check_predict_input(self, X) -> np.ndarray:
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError(
                f"agent types must have two coordinates, got {X.shape[1]}"
            )
        return X


class CongestionEquilibrium(_EquilibriumEstimator):
    """Equilibrium of the congestion game (convex crowding penalty plus
    strategy potential) via the mass-splitting fixed point.

    ``predict`` maps agent types through the fitted transport map: the
    strategy where ``dy_c(x, .)`` first crosses the fitted level profile.
    """

    def __init__(self, cost=None, y_min=0.0, y_max=np.pi / 6, n_cells=200,
                 potential=None, max_iters=500, tol_l1=1e-6, damping=1.0,
                 nu0_support=None):
        self.cost = cost
        self.y_min = y_min
        self.y_max = y_max
        self.n_cells = n_cells
        self.potential = potential
        self.max_iters = max_iters
        self.tol_l1 = tol_l1
        self.damping = damping
        self.nu0_support = nu0_support

    def fit(self, X, y=None, sample_weight=None):
        cloud = as_point_cloud(X, sample_weight)
        grid = self._make_grid()
        cost = self._resolved_cost()
        spec = CongestionSpec(potential=self.potential)
        result = solve_congestion(
            cost, cloud, spec, self._make_nu0(grid), self._solver_config()
        )
        self._store(cloud, grid, result)
        return self

    def predict(self, X) -> np.ndarray:
        X = self._check_predict_input(X)
        cost = self._resolved_cost()
        d = cost.dy_c_matrix(X, self.grid_.midpoints)
        assigned, _, _, _ = _first_crossing(d, self.profile_)
        return assigned


class BestReplyEquilibrium(_EquilibriumEstimator):
    """Equilibrium of the interaction game (strategy potential plus symmetric
    pairwise interaction) via damped best-reply iteration.

    ``predict`` returns each type's best reply against the fitted density.
    ``interaction=None`` uses the quadratic default: ``V(y) = |y - pi/12|^2``
    with kernel ``phi(y, z) = |y - z|^2``.
    """

    def __init__(self, cost=None, y_min=0.0, y_max=np.pi / 2, n_cells=200,
                 interaction=None, max_iters=500, tol_l1=1e-6, damping=1.0,
                 nu0_support=(0.0, np.pi / 6)):
        self.cost = cost
        self.y_min = y_min
        self.y_max = y_max
        self.n_cells = n_cells
        self.interaction = interaction
        self.max_iters = max_iters
        self.tol_l1 = tol_l1
        self.damping = damping
        self.nu0_support = nu0_support

    def _resolved_interaction(self) -> InteractionSpec:
        if self.interaction is None:
            return quadratic_interaction_spec(center=np.pi / 12)
        if not isinstance(self.interaction, InteractionSpec):
            raise TypeError("interaction must be an InteractionSpec or None")
        return self.interaction

    def fit(self, X, y=None, sample_weight=None):
        cloud = as_point_cloud(X, sample_weight)
        grid = self._make_grid()
        result = solve_bestreply(
            self._resolved_cost(), cloud, self._resolved_interaction(),
            self._make_nu0(grid), self._solver_config(),
        )
        self._store(cloud, grid, result)
        return self

    def predict(self, X) -> np.ndarray:
        X = self._check_predict_input(X)
        h = _reply_derivative_factory(
            self._resolved_cost(), self._resolved_interaction(), self.nu_, X
        )
        replies, _, _ = _bisect_replies(
            h, self.grid_.y_min, self.grid_.y_max, X.shape[0]
        )
        return replies


class SinkhornEquilibrium(_EquilibriumEstimator):
    """Entropically regularized equilibrium via generalized Sinkhorn.

    ``functional`` picks the strategy-side block (``CongestionSpec``,
    ``InteractionSpec``, or a fixed ``GridMeasure1D`` marginal; ``None``
    means a bare entropy congestion).  ``predict`` returns the regularized
    barycentric map: the conditional mean strategy of the fitted Gibbs
    coupling given the agent type.
    """

    def __init__(self, cost=None, y_min=0.0, y_max=np.pi / 6, n_cells=200,
                 functional=None, eps=1e-3, max_iters=500, tol_l1=1e-6,
                 damping=1.0, nu0_support=None):
        self.cost = cost
        self.y_min = y_min
        self.y_max = y_max
        self.n_cells = n_cells
        self.functional = functional
        self.eps = eps
        self.max_iters = max_iters
        self.tol_l1 = tol_l1
        self.damping = damping
        self.nu0_support = nu0_support

    def fit(self, X, y=None, sample_weight=None):
        cloud = as_point_cloud(X, sample_weight)
        grid = self._make_grid()
        functional = self.functional if self.functional is not None else CongestionSpec()
        result = solve_sinkhorn(
            self._resolved_cost(), cloud, functional, grid, self.eps,
            self._solver_config(), nu0=self._make_nu0(grid),
        )
        self._store(cloud, grid, result)
        return self

    def predict(self, X) -> np.ndarray:
        X = self._check_predict_input(X)
        cost = self._resolved_cost()
        mids = self.grid_.midpoints
        logp = -cost.c_matrix(X, mids) / self.eps + (self.result_.v / self.eps)[None, :]
        logp -= logsumexp(logp, axis=1, keepdims=True)
        return np.exp(logp) @ mids
