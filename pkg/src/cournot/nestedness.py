"""Diagnostics for the nestedness of the level-set structure.

The level-set construction is a genuine transport map only when super-level
sets nest: for ``y0 < y1`` every point of ``{dy_c(., y0) >= k(y0)}`` should lie
strictly inside ``{dy_c(., y1) > k(y1)}``.  This module counts violations on a
point cloud, computes the largest nested level ``k_max`` and the minimal mass
difference between consecutive level sets, and evaluates a sufficient
criterion comparing that mass-difference rate against the strategy density.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import CostModel
from .measures import GridMeasure1D, PointCloudMeasure
from .transport import LevelProfile

__all__ = [
    "NestednessReport",
    "SufficiencyReport",
    "check_nestedness",
    "k_max",
    "minimal_mass_difference",
    "sufficient_nestedness",
]


@dataclass(frozen=True)
class NestednessReport:
    """Pairwise violation counts over grid midpoints.

    A violation at ``(y0, y1)`` is a cloud point inside the ``y0`` super-level
    set whose ``dy_c(x, y1)`` does not exceed ``k(y1)``; comparisons are
    non-strict on both sides, and exact-equality hits ``dy_c(x, y1) == k(y1)``
    are additionally reported as tangencies.
    """

    is_nested: bool
    violations: list[tuple[float, float, int]] = field(default_factory=list)
    n_tangency: int = 0
    pair_stride: int = 1
    n_pairs: int = 0
    n_grid: int = 0

    @property
    def total_violations(self) -> int:
        return sum(c for _, _, c in self.violations)


@dataclass(frozen=True)
class SufficiencyReport:
    """Outcome of the mass-difference sufficiency criterion.

    ``worst_margin`` is the largest value of
    ``D_min(y0, y1) / (y1 - y0) - min density on [y0, y1]`` over the grid
    pairs examined; the criterion holds when it is negative.
    """

    holds: bool
    worst_margin: float
    n_pairs: int
    pair_stride: int
    note: str = ""


def check_nestedness(cost: CostModel, mu: PointCloudMeasure, profile: LevelProfile,
                     pair_stride: int = 1) -> NestednessReport:
    """Count nestedness violations over strided grid midpoint pairs.

    For pairs ``y0 < y1`` (midpoints subsampled by ``pair_stride``), counts
    cloud points with ``dy_c(x, y0) >= k(y0)`` and ``dy_c(x, y1) <= k(y1)``.
    The pairwise counting is a pair of 0/1 matrix products, so the full
    stride-1 sweep stays a few matrix multiplications even at large cloud
    sizes.
    """
    if pair_stride < 1:
        raise ValueError("pair_stride must be >= 1")
    grid = profile.grid
    idx = np.arange(0, grid.n_cells, pair_stride)
    mids = grid.midpoints[idx]
    D = cost.dy_c_matrix(mu.points, mids)
    k = profile.k_values[idx]
    in_set = (D >= k[None, :]).astype(float)
    not_above = (D <= k[None, :]).astype(float)
    at_level = (D == k[None, :]).astype(float)
    counts = in_set.T @ not_above
    tangent = in_set.T @ at_level
    violations = []
    n_tangency = 0
    n = idx.size
    for a in range(n):
        for b in range(a + 1, n):
            c = counts[a, b]
            if c > 0:
                violations.append((float(mids[a]), float(mids[b]), int(round(c))))
            n_tangency += int(round(tangent[a, b]))
    return NestednessReport(
        is_nested=not violations,
        violations=violations,
        n_tangency=n_tangency,
        pair_stride=pair_stride,
        n_pairs=n * (n - 1) // 2,
        n_grid=grid.n_cells,
    )


def k_max(cost: CostModel, mu: PointCloudMeasure, y0: float, y1: float,
          k0: float) -> float:
    """Largest level at ``y1`` whose super-level set still contains the
    ``(y0, k0)`` super-level set: the minimum of ``dy_c(x, y1)`` over cloud
    points in that set."""
    if not y1 > y0:
        raise ValueError(f"require y0 < y1, got {y0} >= {y1}")
    d0 = cost.dy_c(mu.points, float(y0))
    in_set = d0 >= k0
    if not np.any(in_set):
        raise ValueError(
            f"super-level set at y0={y0}, k0={k0} contains no cloud points"
        )
    return float(cost.dy_c(mu.points[in_set], float(y1)).min())


def minimal_mass_difference(cost: CostModel, mu: PointCloudMeasure, y0: float,
                            y1: float, k0: float) -> float:
    """Mass of the largest nested super-level set at ``y1`` outside the
    ``(y0, k0)`` super-level set (weighted point counting)."""
    km = k_max(cost, mu, y0, y1, k0)
    d0 = cost.dy_c(mu.points, float(y0))
    d1 = cost.dy_c(mu.points, float(y1))
    gained = (d1 >= km) & ~(d0 >= k0)
    return float(mu.weights[gained].sum())


def sufficient_nestedness(cost: CostModel, mu: PointCloudMeasure, nu: GridMeasure1D,
                          profile: LevelProfile, pair_stride: int = 1) -> SufficiencyReport:
    """Evaluate the mass-difference sufficiency criterion over grid pairs.

    For each strided pair ``y0 < y1`` computes
    ``D_min(y0, y1, k(y0)) / (y1 - y0)`` and compares it against the minimum
    of the strategy density over the midpoints between them; the criterion
    holds when every margin is negative.  The sweep shares one sorted table
    per grid column, so the full stride-1 evaluation is O(N^2 log M + N M)
    rather than O(N^2 M).
    """
    if pair_stride < 1:
        raise ValueError("pair_stride must be >= 1")
    if nu.grid != profile.grid:
        raise ValueError("nu and profile must share the same grid")
    grid = profile.grid
    idx = np.arange(0, grid.n_cells, pair_stride)
    n = idx.size
    if n < 2:
        return SufficiencyReport(
            holds=True, worst_margin=float("-inf"), n_pairs=0,
            pair_stride=pair_stride, note="no pairs",
        )
    mids = grid.midpoints[idx]
    D = cost.dy_c_matrix(mu.points, mids)
    k = profile.k_values[idx]
    in_set = D >= k[None, :]
    set_mass = mu.weights @ in_set
    # sorted columns for super-level mass lookups at arbitrary levels
    neg_sorted = np.sort(-D, axis=0)
    order = np.argsort(-D, axis=0, kind="stable")
    cum = np.cumsum(mu.weights[order], axis=0)

    worst = float("-inf")
    n_pairs = 0
    dens = nu.density[idx]
    for a in range(n - 1):
        sel = in_set[:, a]
        if not np.any(sel):
            raise ValueError(
                f"super-level set at y0={mids[a]} contains no cloud points"
            )
        km = D[sel, a + 1:].min(axis=0)  # k_max against every later midpoint
        run_min_dens = np.minimum.accumulate(dens[a:])[1:]
        for off, b in enumerate(range(a + 1, n)):
            count = int(np.searchsorted(neg_sorted[:, b], -km[off], side="right"))
            mass1 = 0.0 if count == 0 else float(cum[count - 1, b])
            dmin = mass1 - float(set_mass[a])
            margin = dmin / (mids[b] - mids[a]) - float(run_min_dens[off])
            if margin > worst:
                worst = margin
            n_pairs += 1
    return SufficiencyReport(
        holds=worst < 0.0,
        worst_margin=worst,
        n_pairs=n_pairs,
        pair_stride=pair_stride,
    )
