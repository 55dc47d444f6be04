"""Fixed-point solver for equilibria with a congestion penalty.

The equilibrium density minimizes ``transport_cost(mu, nu) + Int f(nu) + Int V dnu``
over strategy densities.  Each iteration solves the level profile of the
current density, then closes the first-order condition
``v + f'(nu) + V = const`` for the next density; with the entropic penalty the
closure is ``normalize(exp(-V - v))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .costs import CostModel
from .measures import Grid1D, GridMeasure1D, PointCloudMeasure, normalize
from .results import EquilibriumResult
from .transport import (
    LevelProfile,
    _LevelSetTables,
    _first_crossing,
    assign_map,
    level_profile,
)

__all__ = [
    "CongestionSpec",
    "SolverConfig",
    "congestion_update",
    "optimality_residual",
    "solve_congestion",
]


@dataclass(frozen=True)
class CongestionSpec:
    """Congestion penalty ``f`` plus an optional strategy potential ``V``.

    The shipped penalty is the entropy ``f(t) = t log t``; other names are
    rejected so the extension point stays explicit.  ``potential`` is a
    vectorized callable on strategy values (``None`` means zero).
    """

    f_name: str = "entropy"
    potential: Callable | None = None

    def __post_init__(self):
        if self.f_name != "entropy":
            raise ValueError(
                f"unknown congestion penalty {self.f_name!r}; 'entropy' is the "
                "single shipped implementation"
            )

    def f(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = t[pos] * np.log(t[pos])
        return out

    def f_prime(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ValueError("f_prime requires strictly positive arguments")
        return 1.0 + np.log(t)

    def f_prime_inv(self, s):
        return np.exp(np.asarray(s, dtype=float) - 1.0)

    def f_prime_of_exp(self, t):
        """``f'(exp(t))`` evaluated without forming ``exp(t)`` (overflow-safe)."""
        return 1.0 + np.asarray(t, dtype=float)

    def potential_values(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.potential is None:
            return np.zeros_like(y)
        vals = np.asarray(self.potential(y), dtype=float)
        if vals.shape != y.shape:
            raise ValueError("potential must return one value per strategy")
        return vals


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls shared by the equilibrium solvers."""

    max_iters: int = 500
    tol_l1: float = 1e-6
    damping: float = 1.0
    k_tol: float = 1e-9

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol_l1 > 0:
            raise ValueError("tol_l1 must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if not self.k_tol > 0:
            raise ValueError("k_tol must be positive")


def congestion_update(profile: LevelProfile, spec: CongestionSpec) -> GridMeasure1D:
    """Close the first-order condition for the entropic penalty:
    ``normalize((f')^{-1}(-V - v))``, with the max of ``-V - v`` subtracted
    before exponentiation so the update never overflows (the shift is
    absorbed by the normalization)."""
    grid = profile.grid
    s = -spec.potential_values(grid.midpoints) - profile.v_values
    return normalize(np.exp(s - s.max()), grid)


def optimality_residual(profile: LevelProfile, nu: GridMeasure1D,
                        spec: CongestionSpec) -> float:
    """Sup-norm spread of ``v + f'(nu) + V`` around its median; zero exactly
    at an equilibrium where the first-order condition holds with a constant."""
    if nu.grid != profile.grid:
        raise ValueError("nu and profile must share the same grid")
    r = profile.v_values + spec.f_prime(nu.density) + spec.potential_values(nu.midpoints)
    return float(np.max(np.abs(r - np.median(r))))


def _energy(cost: CostModel, mu: PointCloudMeasure, tables: _LevelSetTables,
            profile: LevelProfile, nu: GridMeasure1D, spec: CongestionSpec) -> float:
    assigned, _, _, _ = _first_crossing(tables.D, profile)
    t_cost = float(np.sum(mu.weights * cost.c(mu.points, assigned)))
    dy = nu.dy
    penalty = float(np.sum(spec.f(nu.density)) * dy)
    potential = float(np.sum(spec.potential_values(nu.midpoints) * nu.density) * dy)
    return t_cost + penalty + potential


def solve_congestion(cost: CostModel, mu: PointCloudMeasure, spec: CongestionSpec,
                     nu0: GridMeasure1D, config: SolverConfig = SolverConfig(),
                     ) -> EquilibriumResult:
    """Iterate profile-solve / density-closure until the density stops moving.

    Stops when the L1 change between successive densities drops to
    ``config.tol_l1`` (or ``max_iters``).  The total energy is evaluated at
    every iterate and recorded in ``energy_history``; the final ``residual``
    is the sup-norm spread of the first-order condition.
    """
    if np.any(nu0.density <= 0):
        raise ValueError("the entropic update needs a strictly positive start density")
    grid = nu0.grid
    tables = _LevelSetTables(cost, mu, grid)
    nu = nu0
    history: list[float] = []
    residual_history: list[float] = []
    energy_history: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        profile = level_profile(cost, mu, nu, _tables=tables)
        energy_history.append(_energy(cost, mu, tables, profile, nu, spec))
        residual_history.append(optimality_residual(profile, nu, spec))
        candidate = congestion_update(profile, spec)
        new_density = config.damping * candidate.density + (1.0 - config.damping) * nu.density
        new = GridMeasure1D(grid.y_min, grid.y_max, grid.n_cells, new_density)
        delta = float(np.abs(new.density - nu.density).sum() * grid.dy)
        history.append(delta)
        nu = new
        if delta <= config.tol_l1:
            converged = True
            break
    profile = level_profile(cost, mu, nu, _tables=tables)
    energy_history.append(_energy(cost, mu, tables, profile, nu, spec))
    residual = optimality_residual(profile, nu, spec)
    residual_history.append(residual)
    amap = assign_map(cost, mu, profile, target=nu, _D=tables.D)
    return EquilibriumResult(
        nu=nu,
        profile=profile,
        assignment=amap,
        iterations=iterations,
        history=history,
        residual=residual,
        converged=converged,
        residual_history=residual_history,
        energy_history=energy_history,
    )
