"""Level-set construction of the multi-to-one transport between a planar type
cloud and a one-dimensional strategy density.

For each strategy ``y`` the super-level set ``{x : dy_c(x, y) >= k}`` sweeps
the type space as ``k`` decreases; the level value ``k(y)`` is chosen so that
the super-level mass matches the strategy CDF.  The transport map sends each
type to the strategy where ``dy_c(x, y) - k(y)`` crosses zero, and
``v(y) = integral of k`` is the strategy-side Kantorovich potential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostModel
from .measures import (
    Grid1D,
    GridMeasure1D,
    GridMismatchError,
    PointCloudMeasure,
    deposit,
    wasserstein1_1d,
)

__all__ = [
    "LevelProfile",
    "AssignmentMap",
    "superlevel_mass",
    "solve_k",
    "level_profile",
    "assign_map",
    "map_coupling",
    "transport_cost",
    "kantorovich_potential_pair",
]


@dataclass(frozen=True)
class LevelProfile:
    """Level values ``k`` and the accumulated potential ``v`` on a strategy grid.

    ``k_values[j]`` is the level at midpoint ``j``; ``v_values`` is the running
    trapezoid integral of ``k`` from ``y_min`` (``v_0 = k_0 * dy / 2``).
    ``attained_mass[j]`` records the super-level mass actually attained at
    ``k_values[j]`` (the closest attainable mass to the CDF target).
    """

    grid: Grid1D
    k_values: np.ndarray
    v_values: np.ndarray
    attained_mass: np.ndarray | None = None

    def __post_init__(self):
        k = np.asarray(self.k_values, dtype=float)
        v = np.asarray(self.v_values, dtype=float)
        if k.shape != (self.grid.n_cells,) or v.shape != (self.grid.n_cells,):
            raise ValueError("k_values and v_values must match the grid size")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(v))):
            raise ValueError("profile values must be finite")
        object.__setattr__(self, "k_values", k)
        object.__setattr__(self, "v_values", v)
        if self.attained_mass is not None:
            object.__setattr__(
                self, "attained_mass", np.asarray(self.attained_mass, dtype=float)
            )


@dataclass(frozen=True)
class AssignmentMap:
    """Per-point strategy assignment with crossing diagnostics.

    ``assigned_y[i]`` is the strategy of point ``i``; ``assigned_cell[i]`` the
    containing grid cell.  ``n_boundary_low``/``n_boundary_high`` count points
    whose crossing indicator never changes sign (assigned to an endpoint), and
    ``n_multi_crossing`` counts points with more than one crossing event (a
    non-nestedness symptom).  When a target density was supplied,
    ``pushforward_w1`` is the exact W1 distance between the deposited
    assignments and that target.
    """

    grid: Grid1D
    assigned_y: np.ndarray
    assigned_cell: np.ndarray
    n_boundary_low: int
    n_boundary_high: int
    n_multi_crossing: int
    pushforward_w1: float | None = None

    @property
    def n_boundary(self) -> int:
        return self.n_boundary_low + self.n_boundary_high


def _integrate_trapezoid(k: np.ndarray, dy: float) -> np.ndarray:
    """Running trapezoid integral of midpoint samples, anchored at y_min.

    The first midpoint sits half a cell above the anchor, contributing
    ``k_0 * dy / 2``; subsequent midpoints add the usual trapezoid increments.
    """
    v = np.empty_like(k)
    v[0] = 0.5 * k[0] * dy
    if k.size > 1:
        v[1:] = v[0] + np.cumsum(0.5 * (k[:-1] + k[1:]) * dy)
    return v


class _LevelSetTables:
    """Sorted per-midpoint tables making level queries exact and fast.

    For each grid midpoint the cloud's ``dy_c`` values are sorted in
    descending order with cumulative weights, so a super-level mass is a
    binary search and the level solving a mass target is an exact quantile
    bracket lookup.
    """

    def __init__(self, cost: CostModel, mu: PointCloudMeasure, grid: Grid1D):
        self.grid = grid
        self.D = cost.dy_c_matrix(mu.points, grid.midpoints)
        if not np.all(np.isfinite(self.D)):
            raise ValueError("dy_c produced non-finite values on the cloud")
        order = np.argsort(-self.D, axis=0, kind="stable")
        self.sorted_desc = np.take_along_axis(self.D, order, axis=0)
        self.cum = np.cumsum(mu.weights[order], axis=0)
        m = self.D.shape[0]
        self._att: list[np.ndarray] = []
        self._kret: list[np.ndarray] = []
        for j in range(grid.n_cells):
            v = self.sorted_desc[:, j]
            ends = np.nonzero(np.diff(v) != 0.0)[0]
            ends = np.concatenate([ends, [m - 1]])
            att = np.concatenate([[0.0], self.cum[ends, j]])
            kret = np.empty(ends.size + 1)
            kret[0] = np.nextafter(v[0], np.inf)
            if ends.size > 1:
                hi = v[ends[:-1]]
                lo = v[ends[:-1] + 1]
                mids = 0.5 * (hi + lo)
                # rounding of the midpoint of adjacent floats must not fall
                # onto the lower value, which would change the attained mass
                kret[1:-1] = np.where(mids > lo, mids, hi)
            kret[-1] = v[-1]
            self._att.append(att)
            self._kret.append(kret)

    def superlevel_mass(self, j: int, k: float) -> float:
        count = np.searchsorted(-self.sorted_desc[:, j], -k, side="right")
        return 0.0 if count == 0 else float(self.cum[count - 1, j])

    def solve_column(self, j: int, target: float) -> tuple[float, float]:
        """Level whose attainable super-level mass is closest to ``target``.

        Returns ``(k, attained_mass)``.  Ties between equally close attainable
        masses resolve to the smaller mass for determinism.
        """
        att = self._att[j]
        pos = int(np.searchsorted(att, target, side="left"))
        if pos == 0:
            idx = 0
        elif pos >= att.size:
            idx = att.size - 1
        else:
            idx = pos - 1 if target - att[pos - 1] <= att[pos] - target else pos
        return float(self._kret[j][idx]), float(att[idx])


def superlevel_mass(cost: CostModel, mu: PointCloudMeasure, y: float, k: float) -> float:
    """Weighted mass of cloud points with ``dy_c(x, y) >= k``."""
    vals = cost.dy_c(mu.points, float(y))
    return float(mu.weights[vals >= k].sum())


def solve_k(cost: CostModel, mu: PointCloudMeasure, y: float, target_mass: float,
            tol: float = 1e-9) -> float:
    """Level ``k`` whose super-level mass best matches ``target_mass``.

    The attainable masses at fixed ``y`` are the cumulative weights of the
    cloud sorted by descending ``dy_c``; the closest one to ``target_mass`` is
    found exactly and the returned ``k`` is the midpoint of the level interval
    attaining it (just above the largest value for mass 0, the smallest value
    itself for mass 1).  ``tol`` is accepted for interface compatibility; the
    quantile lookup is already exact.
    """
    del tol
    if not 0.0 <= target_mass <= 1.0 + 1e-12:
        raise ValueError(f"target_mass must lie in [0, 1], got {target_mass!r}")
    vals = cost.dy_c(mu.points, float(y))
    if not np.all(np.isfinite(vals)):
        raise ValueError("dy_c produced non-finite values on the cloud")
    order = np.argsort(-vals, kind="stable")
    v = vals[order]
    cum = np.cumsum(mu.weights[order])
    ends = np.nonzero(np.diff(v) != 0.0)[0]
    ends = np.concatenate([ends, [v.size - 1]])
    att = np.concatenate([[0.0], cum[ends]])
    pos = int(np.searchsorted(att, target_mass, side="left"))
    if pos == 0:
        idx = 0
    elif pos >= att.size:
        idx = att.size - 1
    else:
        idx = pos - 1 if target_mass - att[pos - 1] <= att[pos] - target_mass else pos
    if idx == 0:
        return float(np.nextafter(v[0], np.inf))
    if idx == att.size - 1:
        return float(v[-1])
    hi = v[ends[idx - 1]]
    lo = v[ends[idx - 1] + 1]
    mid = 0.5 * (hi + lo)
    return float(mid if mid > lo else hi)


def level_profile(cost: CostModel, mu: PointCloudMeasure, nu: GridMeasure1D,
                  tol: float = 1e-9, _tables: "_LevelSetTables | None" = None) -> LevelProfile:
    """Solve the mass-matching equation at every grid midpoint of ``nu``.

    The level at midpoint ``y_j`` makes the super-level mass of the cloud
    match ``nu``'s CDF there (to the closest attainable mass); ``v`` is the
    running trapezoid integral of the levels.
    """
    del tol
    grid = nu.grid
    tables = _tables if _tables is not None else _LevelSetTables(cost, mu, grid)
    masses = nu.cell_masses
    targets = np.cumsum(masses) - 0.5 * masses
    k = np.empty(grid.n_cells)
    attained = np.empty(grid.n_cells)
    for j in range(grid.n_cells):
        k[j], attained[j] = tables.solve_column(j, float(targets[j]))
    v = _integrate_trapezoid(k, grid.dy)
    return LevelProfile(grid=grid, k_values=k, v_values=v, attained_mass=attained)


def _first_crossing(D: np.ndarray, profile: LevelProfile):
    """Vectorized first-crossing scan of ``g = D - k`` along the grid.

    Returns assigned strategies, endpoint flags and the per-point event count
    (midpoint zeros plus strict sign flips).
    """
    grid = profile.grid
    mids = grid.midpoints
    g = D - profile.k_values[None, :]
    m, n = g.shape
    zero_ev = g == 0.0
    flip_ev = g[:, :-1] * g[:, 1:] < 0.0
    events = np.zeros((m, 2 * n - 1), dtype=bool)
    events[:, ::2] = zero_ev
    if n > 1:
        events[:, 1::2] = flip_ev
    has_event = events.any(axis=1)
    first = events.argmax(axis=1)
    n_events = zero_ev.sum(axis=1) + flip_ev.sum(axis=1)

    assigned = np.empty(m)
    is_zero = has_event & (first % 2 == 0)
    jz = first[is_zero] // 2
    assigned[is_zero] = mids[jz]

    is_flip = has_event & (first % 2 == 1)
    jf = (first[is_flip] - 1) // 2
    gj = g[is_flip, jf]
    gj1 = g[is_flip, jf + 1]
    assigned[is_flip] = mids[jf] + grid.dy * gj / (gj - gj1)

    no_event = ~has_event
    pos_side = no_event & (g[:, 0] > 0.0)
    neg_side = no_event & (g[:, 0] < 0.0)
    assigned[pos_side] = grid.y_min
    assigned[neg_side] = grid.y_max
    return assigned, int(pos_side.sum()), int(neg_side.sum()), int((n_events >= 2).sum())


def assign_map(cost: CostModel, mu: PointCloudMeasure, profile: LevelProfile,
               target: GridMeasure1D | None = None,
               _D: np.ndarray | None = None) -> AssignmentMap:
    """Assign each cloud point to the strategy where ``dy_c(x, y) - k(y)``
    first crosses zero along the grid.

    Crossings at a midpoint use the midpoint itself; crossings between
    midpoints are located by linear interpolation.  Points whose indicator
    never crosses are assigned ``y_min`` (positive everywhere) or ``y_max``
    (negative everywhere) and counted as boundary assignments.  Supplying the
    ``target`` density also records the W1 distance between the deposited
    assignments and the target.
    """
    grid = profile.grid
    D = _D if _D is not None else cost.dy_c_matrix(mu.points, grid.midpoints)
    assigned, n_lo, n_hi, n_multi = _first_crossing(D, profile)
    cells = grid.cell_of(assigned)
    w1 = None
    if target is not None:
        w1 = wasserstein1_1d(deposit(assigned, mu.weights, grid), target)
    return AssignmentMap(
        grid=grid,
        assigned_y=assigned,
        assigned_cell=cells,
        n_boundary_low=n_lo,
        n_boundary_high=n_hi,
        n_multi_crossing=n_multi,
        pushforward_w1=w1,
    )


def transport_cost(cost: CostModel, mu: PointCloudMeasure, amap: AssignmentMap) -> float:
    """Cloud-weighted cost of the assignment: ``sum_i w_i c(x_i, T(x_i))``."""
    return float(np.sum(mu.weights * cost.c(mu.points, amap.assigned_y)))


def map_coupling(amap: AssignmentMap, mu: PointCloudMeasure,
                 nu: GridMeasure1D) -> np.ndarray:
    """Dense coupling induced by the assignment order, feasible for
    ``(mu, nu)`` exactly.

    Points are taken in increasing assigned strategy and their weights are
    split across grid cells in order until each cell's mass is filled (the
    monotone coupling between the mapped weights and the cell masses).  The
    underlying plan splits only the points that straddle a cell quantile; the
    plain map is its single-cell rounding.
    """
    if nu.grid != amap.grid:
        raise GridMismatchError("assignment and density live on different grids")
    order = np.argsort(amap.assigned_y, kind="stable")
    w = mu.weights[order]
    t = nu.cell_masses
    gamma = np.zeros((w.size, t.size))
    i = j = 0
    w_left = float(w[0])
    t_left = float(t[0])
    while True:
        take = min(w_left, t_left)
        gamma[order[i], j] = gamma[order[i], j] + take
        w_left -= take
        t_left -= take
        if w_left <= 1e-15:
            i += 1
            if i == w.size:
                break
            w_left = float(w[i])
        if t_left <= 1e-15:
            j += 1
            if j == t.size:
                break
            t_left = float(t[j])
    return gamma


def kantorovich_potential_pair(cost: CostModel, mu: PointCloudMeasure,
                               profile: LevelProfile) -> tuple[np.ndarray, np.ndarray]:
    """Dual pair ``(u, v)``: ``v`` from the profile, ``u`` its c-transform.

    ``u_i = min_j [c(x_i, y_j) - v_j]`` over grid midpoints, so
    ``u_i + v_j <= c(x_i, y_j)`` holds for every pair by construction.
    """
    C = cost.c_matrix(mu.points, profile.grid.midpoints)
    u = (C - profile.v_values[None, :]).min(axis=1)
    return u, profile.v_values.copy()
