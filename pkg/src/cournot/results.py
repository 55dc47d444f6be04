"""Shared result container for the equilibrium solvers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measures import GridMeasure1D
from .transport import AssignmentMap, LevelProfile

__all__ = ["EquilibriumResult"]


@dataclass(frozen=True)
class EquilibriumResult:
    """Converged strategy density with its transport geometry and diagnostics.

    ``history`` is the per-iteration L1 change of the density iterates;
    ``residual`` is the solver's native optimality measure at the final
    iterate (first-order-condition spread for the congestion solver,
    fixed-point mismatch for best reply, last marginal change for Sinkhorn).
    ``energy_history``/``residual_history`` are populated by solvers that
    monitor them.  Sinkhorn additionally fills the dual vectors and, on
    request, the coupling matrix.
    """

    nu: GridMeasure1D
    profile: LevelProfile
    assignment: AssignmentMap
    iterations: int
    history: list[float]
    residual: float
    converged: bool
    residual_history: list[float] = field(default_factory=list)
    energy_history: list[float] = field(default_factory=list)
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    coupling: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)
