"""Entropic-regularization solver with exchangeable marginal blocks.

The coupling is parametrized as ``gamma_ij = w_i m_j exp((u_i + v_j - c_ij)/eps)``
with ``w`` the type weights and ``m`` the strategy cell widths.  The ``u``
block always enforces the type marginal exactly; the ``v`` block is swapped
depending on what pins down the strategy side:

* a fixed strategy marginal (plain optimal transport),
* a congestion penalty ``f`` plus potential ``V`` (closed-form or numeric
  proximal step), or
* a smooth pairwise interaction handled semi-implicitly through the previous
  strategy density.

All updates run in the log domain, so small ``eps`` is safe.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .bestreply import InteractionSpec, _interaction_sum
from .congestion import CongestionSpec, SolverConfig
from .costs import CostModel
from .measures import (
    Grid1D,
    GridMeasure1D,
    GridMismatchError,
    PointCloudMeasure,
    normalize,
    uniform_measure,
)
from .results import EquilibriumResult
from .transport import _LevelSetTables, assign_map, level_profile

__all__ = [
    "GibbsKernel",
    "dual_objective",
    "solve_sinkhorn",
    "u_update",
    "v_update_congestion",
    "v_update_interaction",
    "v_update_marginal",
]

_COUPLING_ENTRY_LIMIT = 20_000_000


class GibbsKernel:
    """Log-domain Gibbs kernel ``-c(x_i, y_j)/eps`` with the reference
    weights of both sides attached."""

    def __init__(self, cost: CostModel, mu: PointCloudMeasure, grid: Grid1D,
                 eps: float):
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.eps = float(eps)
        self.grid = grid
        self.weights = mu.weights
        self.log_k = -cost.c_matrix(mu.points, grid.midpoints) / self.eps
        if not np.all(np.isfinite(self.log_k)):
            raise ValueError("cost matrix contains non-finite entries")
        with np.errstate(divide="ignore"):
            self.log_w = np.where(mu.weights > 0, np.log(mu.weights), -np.inf)
        self.log_m = float(np.log(grid.dy))

    def u_update(self, v: np.ndarray) -> np.ndarray:
        """The ``u`` that makes every coupling row sum to its type weight."""
        inner = logsumexp(self.log_k + (v / self.eps)[None, :], axis=1)
        return -self.eps * (inner + self.log_m)

    def col_log_sum(self, u: np.ndarray) -> np.ndarray:
        """``L_j = log sum_i w_i exp((u_i - c_ij)/eps)``; the column mass of
        cell ``j`` is ``m_j exp(v_j/eps + L_j)``."""
        return logsumexp(
            self.log_k + ((u / self.eps) + self.log_w)[:, None], axis=0
        )

    def column_masses(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.exp(v / self.eps + self.col_log_sum(u) + self.log_m)

    def row_masses(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        inner = logsumexp(self.log_k + (v / self.eps)[None, :], axis=1)
        return np.exp(u / self.eps + self.log_w + inner + self.log_m)

    def total_mass(self, u: np.ndarray, v: np.ndarray) -> float:
        log_total = logsumexp(
            v / self.eps + self.col_log_sum(u) + self.log_m
        )
        return float(np.exp(log_total))

    def coupling(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        n_entries = self.log_k.shape[0] * self.log_k.shape[1]
        if n_entries > _COUPLING_ENTRY_LIMIT:
            raise ValueError(
                f"dense coupling would hold {n_entries} entries; work with "
                "the dual vectors instead"
            )
        log_gamma = (
            self.log_k
            + ((u / self.eps) + self.log_w)[:, None]
            + ((v / self.eps) + self.log_m)[None, :]
        )
        return np.exp(log_gamma)


def u_update(kernel: GibbsKernel, v: np.ndarray) -> np.ndarray:
    return kernel.u_update(v)


def v_update_marginal(kernel: GibbsKernel, u: np.ndarray,
                      target: GridMeasure1D) -> np.ndarray:
    """The ``v`` that makes every coupling column sum to the target cell
    mass.  Cells with zero target mass get ``v = -inf`` (empty column)."""
    t = target.cell_masses
    with np.errstate(divide="ignore"):
        log_t = np.where(t > 0, np.log(t), -np.inf)
    return kernel.eps * (log_t - kernel.log_m - kernel.col_log_sum(u))


def v_update_congestion(kernel: GibbsKernel, u: np.ndarray,
                        spec: CongestionSpec, method: str = "auto",
                        ) -> np.ndarray:
    """Exact maximizer of the dual over ``v`` for the congestion functional.

    The optimality condition at strategy cell ``j`` is
    ``v + V + f'(exp(v/eps + L)) = 0`` with ``L`` from ``col_log_sum``, whose
    left side is strictly increasing in ``v``.  For the entropic penalty the
    root is available in closed form; ``method="numeric"`` solves the same
    scalar equations by bracketed bisection through ``f_prime_of_exp`` and is
    the template for other convex penalties.
    """
    eps = kernel.eps
    big_v = spec.potential_values(kernel.grid.midpoints)
    ell = kernel.col_log_sum(u)
    if method == "auto":
        return -eps * (big_v + 1.0 + ell) / (1.0 + eps)
    if method != "numeric":
        raise ValueError("method must be 'auto' or 'numeric'")

    def phi(v):
        return v + big_v + spec.f_prime_of_exp(v / eps + ell)

    lo = np.full_like(ell, -1.0)
    hi = np.full_like(ell, 1.0)
    for _ in range(200):
        bad = phi(lo) > 0.0
        if not bad.any():
            break
        lo = np.where(bad, 2.0 * lo, lo)
    for _ in range(200):
        bad = phi(hi) < 0.0
        if not bad.any():
            break
        hi = np.where(bad, 2.0 * hi, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        neg = phi(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def v_update_interaction(spec: InteractionSpec, grid: Grid1D,
                         nu_prev: GridMeasure1D) -> np.ndarray:
    """Semi-implicit ``v``: the interaction term is frozen at the previous
    strategy density, so ``v = -(V + Int phi(., z) dnu_prev(z))``."""
    mids = grid.midpoints
    return -(
        np.asarray(spec.potential(mids), dtype=float)
        + _interaction_sum(spec, mids, nu_prev, derivative=False)
    )


def dual_objective(kernel: GibbsKernel, u: np.ndarray, v: np.ndarray,
                   functional) -> float:
    """Concave dual value whose exact block maximizers are the ``u`` and
    ``v`` updates (marginal and congestion modes only); alternating those
    updates can therefore never decrease it."""
    eps = kernel.eps
    mass_term = -eps * (kernel.total_mass(u, v) - 1.0)
    u_term = float(np.sum(u * kernel.weights))
    if isinstance(functional, GridMeasure1D):
        t = functional.cell_masses
        with np.errstate(invalid="ignore"):
            v_term = float(np.sum(np.where(t > 0, v * t, 0.0)))
        return u_term + v_term + mass_term
    if isinstance(functional, CongestionSpec):
        big_v = functional.potential_values(kernel.grid.midpoints)
        conj = float(
            np.sum(np.exp(-v - big_v - 1.0)) * kernel.grid.dy
        )
        return u_term - conj + mass_term
    raise TypeError(
        "dual_objective is defined for a fixed marginal or a congestion "
        "functional"
    )


def solve_sinkhorn(cost: CostModel, mu: PointCloudMeasure, functional,
                   grid: Grid1D, eps: float,
                   config: SolverConfig = SolverConfig(),
                   nu0: GridMeasure1D | None = None,
                   return_coupling: bool = False,
                   congestion_method: str = "auto") -> EquilibriumResult:
    """Alternate the exact type-marginal block with the strategy block of the
    given ``functional`` until the strategy cell masses stop moving (L1).

    ``functional`` selects the strategy block: a ``GridMeasure1D`` fixes the
    marginal outright, a ``CongestionSpec`` applies the congestion proximal
    step, an ``InteractionSpec`` freezes the interaction at the previous
    density (damped by ``config.damping``).  The returned result carries the
    dual vectors; ``diagnostics["dual_history"]`` records the dual objective
    per sweep in the two modes where it is defined, and
    ``diagnostics["row_marginal_error"]`` is the final worst row-constraint
    violation.
    """
    kernel = GibbsKernel(cost, mu, grid, eps)
    if isinstance(functional, GridMeasure1D):
        mode = "marginal"
        if functional.grid != grid:
            raise GridMismatchError("target marginal lives on a different grid")
    elif isinstance(functional, CongestionSpec):
        mode = "congestion"
    elif isinstance(functional, InteractionSpec):
        mode = "interaction"
    else:
        raise TypeError(
            "functional must be a GridMeasure1D, CongestionSpec, or "
            "InteractionSpec"
        )

    n = grid.n_cells
    u = np.zeros(mu.n_points)
    v = np.zeros(n)
    nu_cur = nu0 if nu0 is not None else uniform_measure(grid)
    if nu_cur.grid != grid:
        raise GridMismatchError("nu0 lives on a different grid")
    masses_prev = nu_cur.cell_masses
    history: list[float] = []
    dual_history: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        if mode == "marginal":
            v = v_update_marginal(kernel, u, functional)
            u = kernel.u_update(v)
            masses = kernel.column_masses(u, v)
            delta = float(np.abs(masses - functional.cell_masses).sum())
        elif mode == "congestion":
            u = kernel.u_update(v)
            v = v_update_congestion(kernel, u, functional,
                                    method=congestion_method)
            masses = kernel.column_masses(u, v)
            delta = float(np.abs(masses - masses_prev).sum())
        else:
            v = v_update_interaction(functional, grid, nu_cur)
            u = kernel.u_update(v)
            masses = kernel.column_masses(u, v)
            blended = (
                config.damping * masses
                + (1.0 - config.damping) * nu_cur.cell_masses
            )
            nu_cur = normalize(blended, grid)
            delta = float(np.abs(masses - masses_prev).sum())
        if mode in ("marginal", "congestion"):
            dual_history.append(dual_objective(kernel, u, v, functional))
        history.append(delta)
        masses_prev = masses
        if delta <= config.tol_l1:
            converged = True
            break

    u = kernel.u_update(v)
    masses = kernel.column_masses(u, v)
    nu = normalize(masses, grid)
    row_err = float(np.max(np.abs(kernel.row_masses(u, v) - mu.weights)))
    tables = _LevelSetTables(cost, mu, grid)
    profile = level_profile(cost, mu, nu, _tables=tables)
    assignment = assign_map(cost, mu, profile, target=nu, _D=tables.D)
    diagnostics = {
        "mode": mode,
        "eps": eps,
        "row_marginal_error": row_err,
        "dual_history": dual_history,
        "transport_cost": float(
            np.sum(kernel.coupling(u, v) * (-kernel.log_k * eps))
        ) if kernel.log_k.size <= _COUPLING_ENTRY_LIMIT else None,
    }
    return EquilibriumResult(
        nu=nu,
        profile=profile,
        assignment=assignment,
        iterations=iterations,
        history=history,
        residual=history[-1] if history else float("inf"),
        converged=converged,
        u=u,
        v=v,
        coupling=kernel.coupling(u, v) if return_coupling else None,
        diagnostics=diagnostics,
    )
