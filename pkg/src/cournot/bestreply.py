"""Best-reply iteration for equilibria with smooth pairwise interactions.

Each agent type plays the strategy minimizing
``c(x, y) + V(y) + Int phi(y, z) dnu(z)`` against the current strategy
density; pushing the type measure through the reply map gives the next
density.  Under uniform convexity of the per-agent objective the replies are
unique and interior and the iteration contracts in practice.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .costs import CostModel
from .measures import (
    Grid1D,
    GridMeasure1D,
    PointCloudMeasure,
    deposit,
    wasserstein1_1d,
)
from .results import EquilibriumResult
from .congestion import SolverConfig
from .transport import AssignmentMap, _LevelSetTables, assign_map, level_profile

__all__ = [
    "InteractionSpec",
    "best_reply_point",
    "push_forward",
    "solve_bestreply",
]


@dataclass(frozen=True)
class InteractionSpec:
    """Strategy potential ``V`` and symmetric pairwise interaction ``phi``.

    ``potential``/``potential_prime`` evaluate ``V`` and ``V'`` on strategy
    arrays; ``interaction``/``interaction_prime`` evaluate ``phi(y, z)`` and
    its ``y``-derivative with broadcasting.
    """

    potential: Callable
    potential_prime: Callable
    interaction: Callable
    interaction_prime: Callable

    def check_symmetry(self, ys, tol: float = 1e-12) -> None:
        """Verify ``phi(y, z) == phi(z, y)`` on sample pairs."""
        ys = np.asarray(ys, dtype=float)
        a = self.interaction(ys[:, None], ys[None, :])
        gap = float(np.max(np.abs(a - a.T)))
        if gap > tol:
            raise ValueError(f"interaction kernel is asymmetric: max gap {gap:.3e}")


def quadratic_potential(center: float, weight: float = 1.0) -> tuple[Callable, Callable]:
    """``V(y) = weight * |y - center|^2`` and its derivative."""
    def value(y):
        d = np.asarray(y, dtype=float) - center
        return weight * d * d

    def prime(y):
        return 2.0 * weight * (np.asarray(y, dtype=float) - center)

    return value, prime


def quadratic_interaction_spec(center: float, weight: float = 1.0) -> InteractionSpec:
    """The shipped interaction preset: quadratic potential around ``center``
    plus the attractive kernel ``phi(y, z) = |y - z|^2``."""
    value, prime = quadratic_potential(center, weight)
    return InteractionSpec(
        potential=value,
        potential_prime=prime,
        interaction=lambda y, z: (np.asarray(y, dtype=float) - np.asarray(z, dtype=float)) ** 2,
        interaction_prime=lambda y, z: 2.0 * (np.asarray(y, dtype=float) - np.asarray(z, dtype=float)),
    )


def _interaction_sum(spec: InteractionSpec, ys, nu: GridMeasure1D, derivative: bool) -> np.ndarray:
    """``Int phi(y, z) dnu(z)`` (or its y-derivative) at each ``y`` in ``ys``."""
    ys = np.asarray(ys, dtype=float)
    kern = spec.interaction_prime if derivative else spec.interaction
    vals = kern(ys[:, None], nu.midpoints[None, :])
    return vals @ nu.cell_masses


def _extended_interp(y, mids, vals, dy):
    """Linear interpolation through midpoint samples with linear extrapolation
    into the outer half-cells (exact for affine data)."""
    if mids.size == 1:
        return np.full_like(np.asarray(y, dtype=float), vals[0])
    lo_slope = (vals[1] - vals[0]) / dy
    hi_slope = (vals[-1] - vals[-2]) / dy
    xs = np.concatenate([[mids[0] - dy], mids, [mids[-1] + dy]])
    fs = np.concatenate([[vals[0] - lo_slope * dy], vals, [vals[-1] + hi_slope * dy]])
    return np.interp(y, xs, fs)


def _reply_derivative_factory(cost: CostModel, spec: InteractionSpec,
                              nu: GridMeasure1D, points: np.ndarray):
    """Per-point derivative of the objective in ``y``.

    ``dy_c`` and ``V'`` are exact; the interaction derivative is precomputed
    at grid midpoints and linearly interpolated (exact for polynomial kernels
    of degree <= 2, O(dy^2) otherwise).
    """
    mids = nu.midpoints
    wp = _interaction_sum(spec, mids, nu, derivative=True)
    dy = nu.dy

    def h(y):
        return (
            cost.dy_c(points, y)
            + spec.potential_prime(y)
            + _extended_interp(y, mids, wp, dy)
        )

    return h


def _bisect_replies(h, y_min: float, y_max: float, n: int,
                    steps: int = 64) -> tuple[np.ndarray, int, int]:
    """Vectorized safeguarded bisection of the increasing derivative ``h``.

    Points with ``h >= 0`` at ``y_min`` clamp low; ``h <= 0`` at ``y_max``
    clamp high; the rest bisect the sign change.  ``steps`` halvings shrink
    the bracket to rounding size for any strategy interval of order one.
    """
    a = np.full(n, y_min)
    b = np.full(n, y_max)
    clamp_lo = h(a) >= 0.0
    clamp_hi = h(b) <= 0.0
    for _ in range(steps):
        m = 0.5 * (a + b)
        neg = h(m) < 0.0
        a = np.where(neg, m, a)
        b = np.where(neg, b, m)
    out = 0.5 * (a + b)
    out[clamp_lo] = y_min
    out[clamp_hi] = y_max
    return out, int(clamp_lo.sum()), int(clamp_hi.sum())


def best_reply_point(cost: CostModel, spec: InteractionSpec, nu: GridMeasure1D,
                     x, tol: float = 1e-12) -> float:
    """Best reply of a single type ``x`` against the density ``nu``.

    Solves the first-order condition by bisection after spot-checking that the
    derivative is increasing on a coarse sample; if the convexity check fails,
    falls back to golden-section minimization of the objective itself.
    """
    x = np.asarray(x, dtype=float).reshape(1, 2)
    y_min, y_max = nu.y_min, nu.y_max
    mids = nu.midpoints
    wp = _interaction_sum(spec, mids, nu, derivative=True)

    def h(y):
        y = np.asarray(y, dtype=float)
        return (
            cost.dy_c(x, y)
            + spec.potential_prime(y)
            + _extended_interp(y, mids, wp, nu.dy)
        ).ravel()

    sample = np.linspace(y_min, y_max, 33)
    hs = h(sample)
    if np.any(np.diff(hs) < -1e-10 * max(1.0, np.max(np.abs(hs)))):
        warnings.warn(
            "objective derivative is not increasing; falling back to "
            "golden-section search",
            RuntimeWarning,
            stacklevel=2,
        )

        def objective(y):
            y = np.asarray(y, dtype=float)
            inter = spec.interaction(y[..., None], nu.midpoints) @ nu.cell_masses
            return (cost.c(x, y) + spec.potential(y) + inter).ravel()

        invphi = (np.sqrt(5.0) - 1.0) / 2.0
        a, b = y_min, y_max
        c1 = b - invphi * (b - a)
        c2 = a + invphi * (b - a)
        f1, f2 = objective(np.array([c1]))[0], objective(np.array([c2]))[0]
        while b - a > tol:
            if f1 <= f2:
                b, c2, f2 = c2, c1, f1
                c1 = b - invphi * (b - a)
                f1 = objective(np.array([c1]))[0]
            else:
                a, c1, f1 = c1, c2, f2
                c2 = a + invphi * (b - a)
                f2 = objective(np.array([c2]))[0]
        return float(0.5 * (a + b))

    if hs[0] >= 0.0:
        return float(y_min)
    if hs[-1] <= 0.0:
        return float(y_max)
    a, b = y_min, y_max
    while b - a > tol:
        m = 0.5 * (a + b)
        if h(np.array([m]))[0] < 0.0:
            a = m
        else:
            b = m
    return float(0.5 * (a + b))


def push_forward(values, mu: PointCloudMeasure, grid: Grid1D) -> GridMeasure1D:
    """Push the type weights through a reply map onto the strategy grid
    (linear two-cell deposit; boundary cells absorb the outer share)."""
    return deposit(values, mu.weights, grid)


def solve_bestreply(cost: CostModel, mu: PointCloudMeasure, spec: InteractionSpec,
                    nu0: GridMeasure1D, config: SolverConfig = SolverConfig(),
                    ) -> EquilibriumResult:
    """Iterate reply-map pushforwards until the strategy density stops moving.

    ``residual`` is the fixed-point mismatch ``||pushforward(B(nu*)) - nu*||_1``
    measured with one extra reply pass at the final density.  The result also
    carries the level profile and crossing map of the final density so its
    level-curve geometry can be inspected like the congestion solver's.
    """
    grid = nu0.grid
    spec.check_symmetry(np.linspace(grid.y_min, grid.y_max, 7))
    nu = nu0
    history: list[float] = []
    residual_history: list[float] = []
    converged = False
    iterations = 0
    n_lo = n_hi = 0
    for iterations in range(1, config.max_iters + 1):
        h = _reply_derivative_factory(cost, spec, nu, mu.points)
        replies, n_lo, n_hi = _bisect_replies(h, grid.y_min, grid.y_max, mu.n_points)
        candidate = push_forward(replies, mu, grid)
        new_density = config.damping * candidate.density + (1.0 - config.damping) * nu.density
        new = GridMeasure1D(grid.y_min, grid.y_max, grid.n_cells, new_density)
        delta = float(np.abs(new.density - nu.density).sum() * grid.dy)
        history.append(delta)
        residual_history.append(
            float(np.abs(candidate.density - nu.density).sum() * grid.dy)
        )
        nu = new
        if delta <= config.tol_l1:
            converged = True
            break
    h = _reply_derivative_factory(cost, spec, nu, mu.points)
    replies, n_lo, n_hi = _bisect_replies(h, grid.y_min, grid.y_max, mu.n_points)
    final_push = push_forward(replies, mu, grid)
    residual = float(np.abs(final_push.density - nu.density).sum() * grid.dy)
    tables = _LevelSetTables(cost, mu, grid)
    profile = level_profile(cost, mu, nu, _tables=tables)
    reply_map = AssignmentMap(
        grid=grid,
        assigned_y=replies,
        assigned_cell=grid.cell_of(replies),
        n_boundary_low=n_lo,
        n_boundary_high=n_hi,
        n_multi_crossing=0,
        pushforward_w1=wasserstein1_1d(final_push, nu),
    )
    return EquilibriumResult(
        nu=nu,
        profile=profile,
        assignment=reply_map,
        iterations=iterations,
        history=history,
        residual=residual,
        converged=converged,
        residual_history=residual_history,
        diagnostics={"n_clamped_low": n_lo, "n_clamped_high": n_hi},
    )
