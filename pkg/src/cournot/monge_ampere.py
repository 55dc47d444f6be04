"""Consistency check between a strategy density and its level-set geometry.

For a one-dimensional strategy density produced by the level-set transport,
the density must equal a line integral over the level curve
``{x : dy_c(x, y) = k(y)}``:

    nu(y) = integral over the curve of (dyy_c - k'(y)) / |grad_x dy_c| * mu ds

This module extracts level curves (an exact chord parameterization for the
quadratic arc cost, marching squares for generic costs), evaluates the line
integral by composite trapezoid over the polyline, and reports the relative
L1 mismatch against a converged density.
"""

from __future__ import annotations

import warnings

import numpy as np

from .costs import ArcQuadraticCost, CostModel

__all__ = [
    "SingularityError",
    "quarter_disk_density",
    "level_curve",
    "ma_density",
    "ma_residual",
]


class SingularityError(ArithmeticError):
    """Raised when ``|grad_x dy_c|`` vanishes on a level curve."""

    def __init__(self, message: str, location=None):
        super().__init__(message)
        self.location = location


def quarter_disk_density(x) -> np.ndarray:
    """Uniform density ``4/pi`` on the open quarter disk
    ``{x1 > 0, x2 > 0, x1^2 + x2^2 < 1}``, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    inside = (x[..., 0] > 0.0) & (x[..., 1] > 0.0) & (
        x[..., 0] ** 2 + x[..., 1] ** 2 < 1.0
    )
    return np.where(inside, 4.0 / np.pi, 0.0)


def _quadratic_chord(y: float, k: float, resolution: int) -> np.ndarray:
    """Exact level chord of the quadratic arc cost inside the quarter disk.

    The level set ``{2(x1 sin y - x2 cos y) = k}`` is the line
    ``x = (k/2) n + t tau`` with ``n = (sin y, -cos y)``, ``tau = (cos y, sin y)``;
    the quarter-disk clip is ``t in (max(-R, -(k/2) tan y, (k/2) cot y), R)``
    with ``R = sqrt(1 - k^2/4)``.
    """
    if k * k >= 4.0:
        return np.empty((0, 2))
    radius = float(np.sqrt(1.0 - 0.25 * k * k))
    t_lo = max(-radius, -(0.5 * k) * np.tan(y), (0.5 * k) / np.tan(y))
    if t_lo >= radius:
        return np.empty((0, 2))
    t = np.linspace(t_lo, radius, resolution)
    n1, n2 = np.sin(y), -np.cos(y)
    return np.stack(
        [0.5 * k * n1 + t * np.cos(y), 0.5 * k * n2 + t * np.sin(y)], axis=1
    )


def _marching_squares(f, k: float, resolution: int) -> np.ndarray:
    """Longest polyline of ``{f = k}`` inside the quarter disk via marching
    squares on ``[0, 1]^2``, keeping only cells fully inside the closed disk."""
    n = resolution
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    nodes = np.stack([X, Y], axis=-1)
    F = f(nodes) - k
    inside = X * X + Y * Y <= 1.0

    cell_ok = inside[:-1, :-1] & inside[1:, :-1] & inside[:-1, 1:] & inside[1:, 1:]

    def interp(p0, f0, p1, f1):
        t = f0 / (f0 - f1)
        return p0 + t * (p1 - p0)

    # segments keyed by the grid edges they puncture so they chain exactly
    segments = []
    adjacency: dict = {}
    ii, jj = np.nonzero(cell_ok)
    for i, j in zip(ii, jj):
        corners = [
            (F[i, j], nodes[i, j]),
            (F[i + 1, j], nodes[i + 1, j]),
            (F[i + 1, j + 1], nodes[i + 1, j + 1]),
            (F[i, j + 1], nodes[i, j + 1]),
        ]
        edge_ids = [
            ("h", i, j),        # bottom: (i,j)-(i+1,j)
            ("v", i + 1, j),    # right:  (i+1,j)-(i+1,j+1)
            ("h", i, j + 1),    # top:    (i,j+1)-(i+1,j+1)
            ("v", i, j),        # left:   (i,j)-(i,j+1)
        ]
        hits = []
        for e in range(4):
            f0, p0 = corners[e]
            f1, p1 = corners[(e + 1) % 4]
            if (f0 < 0.0) != (f1 < 0.0):
                hits.append((edge_ids[e], interp(p0, f0, p1, f1)))
        if len(hits) == 2:
            pairs = [hits]
        elif len(hits) == 4:
            # ambiguous saddle: split by the cell-center sign
            fc = 0.25 * sum(c[0] for c in corners)
            if (fc < 0.0) == (corners[0][0] < 0.0):
                pairs = [[hits[0], hits[3]], [hits[1], hits[2]]]
            else:
                pairs = [[hits[0], hits[1]], [hits[2], hits[3]]]
        else:
            continue
        for (ea, pa), (eb, pb) in pairs:
            idx = len(segments)
            segments.append((ea, pa, eb, pb))
            adjacency.setdefault(ea, []).append(idx)
            adjacency.setdefault(eb, []).append(idx)

    if not segments:
        return np.empty((0, 2))

    used = [False] * len(segments)

    def walk(start_edge):
        pts = []
        edge = start_edge
        while True:
            nxt = [s for s in adjacency.get(edge, []) if not used[s]]
            if not nxt:
                break
            s = nxt[0]
            used[s] = True
            ea, pa, eb, pb = segments[s]
            if ea == edge:
                if not pts:
                    pts.append(pa)
                pts.append(pb)
                edge = eb
            else:
                if not pts:
                    pts.append(pb)
                pts.append(pa)
                edge = ea
        return pts

    # open curve endpoints are edges touched once; walk those first
    chains = []
    for edge, segs in adjacency.items():
        if len(segs) == 1 and not used[segs[0]]:
            pts = walk(edge)
            if len(pts) >= 2:
                chains.append(np.asarray(pts))
    for s in range(len(segments)):   # leftover closed loops
        if not used[s]:
            pts = walk(segments[s][0])
            if len(pts) >= 2:
                chains.append(np.asarray(pts))

    def arclength(poly):
        return float(np.sum(np.linalg.norm(np.diff(poly, axis=0), axis=1)))

    return max(chains, key=arclength) if chains else np.empty((0, 2))


def level_curve(cost: CostModel, y: float, k: float, resolution: int = 400) -> np.ndarray:
    """Ordered polyline of ``{x : dy_c(x, y) = k}`` inside the quarter disk.

    Uses the exact chord parameterization for the quadratic arc cost and
    marching squares for generic costs.  Returns an ``(n, 2)`` array, empty
    when the level set misses the domain.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    y = float(y)
    k = float(k)
    if isinstance(cost, ArcQuadraticCost) and 1e-9 < y < np.pi / 2 - 1e-9:
        return _quadratic_chord(y, k, resolution)
    return _marching_squares(lambda pts: cost.dy_c(pts, y), k, resolution)


def ma_density(cost: CostModel, mu_density, y: float, k: float, kprime: float,
               resolution: int = 400) -> float:
    """Line-integral prediction of the strategy density at ``y``:

    ``integral over {dy_c(., y) = k} of (dyy_c - kprime)/|grad_x dy_c| * mu ds``

    evaluated by composite trapezoid along the level polyline.  ``mu_density``
    is a callable density on the type space.  Returns 0 for an empty level
    set; raises :class:`SingularityError` when ``|grad_x dy_c|`` drops below
    ``1e-8`` on the curve.
    """
    poly = level_curve(cost, y, k, resolution)
    if poly.shape[0] < 2:
        return 0.0
    grad = cost.grad_x_dy_c(poly, y)
    norms = np.linalg.norm(grad, axis=-1)
    weakest = int(np.argmin(norms))
    if norms[weakest] < 1e-8:
        raise SingularityError(
            f"|grad_x dy_c| = {norms[weakest]:.3e} on the level curve at "
            f"y={y}, k={k}",
            location=tuple(poly[weakest]),
        )
    vals = (cost.dyy_c(poly, y) - kprime) / norms * np.asarray(mu_density(poly), dtype=float)
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    return float(np.sum(0.5 * (vals[:-1] + vals[1:]) * seg))


def ma_residual(cost: CostModel, mu_density, result, resolution: int = 400) -> float:
    """Relative L1 mismatch between a converged density and its line-integral
    prediction: ``sum_j |G_j - nu_j| / sum_j nu_j`` over grid midpoints.

    ``result`` carries the converged density (``result.nu``) and level profile
    (``result.profile``); ``k'`` comes from centered differences on the
    profile (one-sided at the ends).
    """
    nu = result.nu
    profile = result.profile
    grid = profile.grid
    if grid.n_cells < 2:
        raise ValueError("ma_residual needs at least two grid cells")
    if grid.n_cells < 3:
        warnings.warn(
            "only one-sided slope estimates are available on a 2-cell grid",
            RuntimeWarning,
            stacklevel=2,
        )
    kprime = np.gradient(profile.k_values, grid.dy)
    predicted = np.array([
        ma_density(cost, mu_density, float(yj), float(kj), float(kpj), resolution)
        for yj, kj, kpj in zip(grid.midpoints, profile.k_values, kprime)
    ])
    return float(np.abs(predicted - nu.density).sum() / nu.density.sum())
