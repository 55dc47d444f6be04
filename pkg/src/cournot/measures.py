"""Probability measures for the agent population and the strategy distribution.

The population of agent types is a weighted point cloud in ``R^m`` (quadrature
nodes or samples of a density on the type space).  The strategy distribution
lives on a uniform one-dimensional grid as a piecewise-constant density whose
CDF is piecewise linear.  Both are immutable after construction and validate
their own invariants.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateMeasureError",
    "GridMismatchError",
    "Grid1D",
    "PointCloudMeasure",
    "GridMeasure1D",
    "QuarterDiskSampler",
    "quarter_disk",
    "uniform_measure",
    "normalize",
    "deposit",
    "wasserstein1_1d",
]

#: admissible deviation of a density's total mass from 1
MASS_TOL = 1e-10
#: admissible deviation of point-cloud weights from summing to 1
WEIGHT_SUM_TOL = 1e-12


class DegenerateMeasureError(ValueError):
    """Raised when a density would have zero (or negative) total mass."""


class GridMismatchError(ValueError):
    """Raised when two grid measures do not live on the same grid."""


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype, copy=True, order="C")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell grid on ``(y_min, y_max)``.

    Cells are half-open intervals of width ``dy``; densities are sampled at
    cell midpoints.
    """

    y_min: float
    y_max: float
    n_cells: int

    def __post_init__(self):
        if not np.isfinite(self.y_min) or not np.isfinite(self.y_max):
            raise ValueError("grid bounds must be finite")
        if not self.y_max > self.y_min:
            raise ValueError(f"require y_min < y_max, got [{self.y_min}, {self.y_max}]")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.n_cells

    @property
    def midpoints(self) -> np.ndarray:
        return self.y_min + (np.arange(self.n_cells) + 0.5) * self.dy

    @property
    def edges(self) -> np.ndarray:
        return self.y_min + np.arange(self.n_cells + 1) * self.dy

    def cell_of(self, y) -> np.ndarray:
        """Index of the cell containing ``y`` (clipped to valid range)."""
        idx = np.floor((np.asarray(y, dtype=float) - self.y_min) / self.dy)
        return np.clip(idx, 0, self.n_cells - 1).astype(int)


@dataclass(frozen=True)
class PointCloudMeasure:
    """Weighted point cloud: points ``(M, m)`` with nonnegative weights summing to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError("points must be a nonempty (M, m) array")
        if weights.shape != (points.shape[0],):
            raise ValueError(
                f"weights shape {weights.shape} does not match {points.shape[0]} points"
            )
        if not np.all(np.isfinite(points)) or not np.all(np.isfinite(weights)):
            raise ValueError("points and weights must be finite")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        total = float(weights.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total!r}")
        object.__setattr__(self, "points", _frozen_array(points))
        object.__setattr__(self, "weights", _frozen_array(weights))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path) -> None:
        """Write rows ``x1,...,xm,weight``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i + 1}" for i in range(self.dim)] + ["weight"])
            for row, w in zip(self.points, self.weights):
                writer.writerow([f"{v:.17g}" for v in row] + [f"{w:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "PointCloudMeasure":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[-1] != "weight":
                raise ValueError(f"expected trailing 'weight' column in {path}")
            rows = [[float(v) for v in row] for row in reader if row]
        data = np.asarray(rows, dtype=float)
        if data.ndim != 2 or data.shape[1] != len(header):
            raise ValueError(f"malformed point cloud CSV {path}")
        return cls(points=data[:, :-1], weights=data[:, -1])


@dataclass(frozen=True)
class GridMeasure1D:
    """Piecewise-constant probability density on a uniform grid.

    ``density[j]`` is the value on cell ``j``; cell masses are
    ``density * dy`` and must sum to 1 within ``MASS_TOL``.
    """

    y_min: float
    y_max: float
    n_cells: int
    density: np.ndarray

    def __post_init__(self):
        grid = Grid1D(self.y_min, self.y_max, self.n_cells)
        object.__setattr__(self, "n_cells", grid.n_cells)
        density = np.asarray(self.density, dtype=float)
        if density.shape != (grid.n_cells,):
            raise ValueError(
                f"density shape {density.shape} does not match n_cells={grid.n_cells}"
            )
        if not np.all(np.isfinite(density)):
            raise ValueError("density must be finite")
        if np.any(density < 0):
            raise ValueError("density must be nonnegative")
        mass = float(density.sum() * grid.dy)
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError(f"density mass must be 1 within {MASS_TOL}, got {mass!r}")
        object.__setattr__(self, "density", _frozen_array(density))

    @property
    def grid(self) -> Grid1D:
        return Grid1D(self.y_min, self.y_max, self.n_cells)

    @property
    def dy(self) -> float:
        return self.grid.dy

    @property
    def midpoints(self) -> np.ndarray:
        return self.grid.midpoints

    @property
    def cell_masses(self) -> np.ndarray:
        return self.density * self.dy

    def cdf(self, y):
        """CDF at ``y`` (scalar or array): piecewise-linear, exact on this grid.

        Raises ``ValueError`` for arguments outside ``[y_min, y_max]`` beyond a
        tiny rounding allowance.
        """
        y_arr = np.asarray(y, dtype=float)
        span = self.y_max - self.y_min
        slack = 1e-12 * max(1.0, abs(self.y_min), abs(self.y_max))
        if np.any(y_arr < self.y_min - slack) or np.any(y_arr > self.y_max + slack):
            raise ValueError(
                f"cdf argument outside [{self.y_min}, {self.y_max}]: "
                f"min={y_arr.min()!r} max={y_arr.max()!r}"
            )
        del span
        edges = self.grid.edges
        cum = np.concatenate([[0.0], np.cumsum(self.cell_masses)])
        out = np.interp(np.clip(y_arr, self.y_min, self.y_max), edges, cum)
        return float(out) if np.isscalar(y) or np.ndim(y) == 0 else out

    def to_csv(self, path) -> None:
        """Write rows ``y,density`` at cell midpoints."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["y", "density"])
            for y, d in zip(self.midpoints, self.density):
                writer.writerow([f"{y:.17g}", f"{d:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "GridMeasure1D":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:2] != ["y", "density"]:
                raise ValueError(f"expected 'y,density' header in {path}")
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        if len(rows) < 1:
            raise ValueError(f"empty density CSV {path}")
        ys = np.array([r[0] for r in rows])
        dens = np.array([r[1] for r in rows])
        if len(ys) == 1:
            raise ValueError(f"cannot infer grid spacing from a single row in {path}")
        steps = np.diff(ys)
        dy = float(steps[0])
        if dy <= 0 or not np.allclose(steps, dy, rtol=1e-9, atol=1e-12):
            raise ValueError(f"midpoints in {path} are not uniformly spaced")
        return cls(
            y_min=float(ys[0] - dy / 2),
            y_max=float(ys[-1] + dy / 2),
            n_cells=len(ys),
            density=dens,
        )


def normalize(values, grid: Grid1D) -> GridMeasure1D:
    """Normalize nonnegative cell values into a probability density on ``grid``.

    Raises ``DegenerateMeasureError`` when every value is zero.
    """
    vals = np.asarray(values, dtype=float)
    if vals.shape != (grid.n_cells,):
        raise ValueError(f"expected {grid.n_cells} values, got shape {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise ValueError("values must be finite")
    if np.any(vals < 0):
        raise ValueError("values must be nonnegative")
    total = float(vals.sum())
    if total <= 0.0:
        raise DegenerateMeasureError("all cell values are zero; cannot normalize")
    density = vals / (total * grid.dy)
    return GridMeasure1D(grid.y_min, grid.y_max, grid.n_cells, density)


def uniform_measure(grid: Grid1D, support: tuple[float, float] | None = None) -> GridMeasure1D:
    """Uniform density on ``grid``, optionally restricted to cells whose midpoint
    falls in ``support = (lo, hi)``."""
    vals = np.ones(grid.n_cells)
    if support is not None:
        lo, hi = support
        if not hi > lo:
            raise ValueError(f"support interval must satisfy lo < hi, got {support}")
        mid = grid.midpoints
        vals = ((mid > lo) & (mid < hi)).astype(float)
    return normalize(vals, grid)


def deposit(values, weights, grid: Grid1D) -> GridMeasure1D:
    """Deposit weighted samples onto ``grid`` with linear (two-cell) splitting.

    Each sample splits its weight between the two cells whose midpoints
    bracket it, proportionally to proximity; boundary cells absorb the outer
    share.  Preserves total mass exactly and the sample mean up to ``dy``.
    """
    vals = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if vals.shape != w.shape or vals.ndim != 1:
        raise ValueError("values and weights must be matching 1-D arrays")
    if np.any(vals < grid.y_min) or np.any(vals > grid.y_max):
        raise ValueError("values outside the grid range")
    s = (vals - grid.y_min) / grid.dy - 0.5
    j0 = np.floor(s).astype(int)
    frac = s - j0
    lo = np.clip(j0, 0, grid.n_cells - 1)
    hi = np.clip(j0 + 1, 0, grid.n_cells - 1)
    mass = np.zeros(grid.n_cells)
    np.add.at(mass, lo, w * (1.0 - frac))
    np.add.at(mass, hi, w * frac)
    return normalize(mass, grid)


def _require_same_grid(a: GridMeasure1D, b: GridMeasure1D) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(
            f"grids differ: [{a.y_min}, {a.y_max}] x {a.n_cells} vs "
            f"[{b.y_min}, {b.y_max}] x {b.n_cells}"
        )


def wasserstein1_1d(a: GridMeasure1D, b: GridMeasure1D) -> float:
    """Exact 1-Wasserstein distance between two densities on the same grid.

    Computed as the integral of ``|CDF_a - CDF_b|``.  Both CDFs are piecewise
    linear on the cells, so the integral is done in closed form per cell
    (splitting at the zero crossing when the difference changes sign), which
    keeps metric identities such as the triangle inequality at rounding error.
    """
    _require_same_grid(a, b)
    dy = a.dy
    d = np.concatenate([[0.0], np.cumsum(a.cell_masses - b.cell_masses)])
    lo, hi = d[:-1], d[1:]
    same_sign = lo * hi >= 0.0
    area = np.where(
        same_sign,
        0.5 * (np.abs(lo) + np.abs(hi)) * dy,
        0.5 * (lo * lo + hi * hi) / np.maximum(np.abs(lo - hi), 1e-300) * dy,
    )
    return float(area.sum())


@dataclass(frozen=True)
class QuarterDiskSampler:
    """Discretization of the uniform probability measure on the open quarter disk
    ``{x1 > 0, x2 > 0, x1^2 + x2^2 < 1}``.

    Schemes
    -------
    ``"tensor-polar-quadrature"``
        Deterministic tensor Gauss-Legendre nodes in ``(r, theta)`` with the
        polar weight; integrates smooth integrands to high order.  The actual
        point count is ``ceil(sqrt(n_points))**2``.
    ``"stratified"``
        Stratified jittered sampling, uniform in ``(r^2, theta)``, equal
        weights; requires ``seed`` for reproducibility.
    """

    n_points: int
    scheme: str = "tensor-polar-quadrature"
    seed: int | None = None

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("n_points must be positive")
        if self.scheme not in ("tensor-polar-quadrature", "stratified"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def sample(self) -> PointCloudMeasure:
        if self.scheme == "tensor-polar-quadrature":
            return self._tensor_quadrature()
        return self._stratified()

    def _tensor_quadrature(self) -> PointCloudMeasure:
        n_side = int(np.ceil(np.sqrt(self.n_points)))
        nodes, gl_w = np.polynomial.legendre.leggauss(n_side)
        # map from (-1, 1) to (0, 1) for r and to (0, pi/2) for theta
        r = 0.5 * (nodes + 1.0)
        wr = 0.5 * gl_w
        theta = (np.pi / 4) * (nodes + 1.0)
        wt = (np.pi / 4) * gl_w
        R, T = np.meshgrid(r, theta, indexing="ij")
        pts = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=1)
        # uniform density 4/pi on the quarter disk, polar Jacobian r
        w = ((4.0 / np.pi) * (r * wr)[:, None] * wt[None, :]).ravel()
        w = w / w.sum()
        return PointCloudMeasure(points=pts, weights=w)

    def _stratified(self) -> PointCloudMeasure:
        if self.seed is None:
            raise ValueError("stratified scheme requires a seed")
        rng = np.random.default_rng(self.seed)
        n_side = int(np.ceil(np.sqrt(self.n_points)))
        m = n_side * n_side
        iu, it = np.meshgrid(np.arange(n_side), np.arange(n_side), indexing="ij")
        u = (iu.ravel() + rng.random(m)) / n_side   # r^2 stratum
        t = (it.ravel() + rng.random(m)) / n_side   # theta stratum
        r = np.sqrt(u)
        theta = t * (np.pi / 2)
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        w = np.full(m, 1.0 / m)
        return PointCloudMeasure(points=pts, weights=w)


def quarter_disk(n_points: int, scheme: str = "tensor-polar-quadrature",
                 seed: int | None = None) -> PointCloudMeasure:
    """Convenience wrapper around :class:`QuarterDiskSampler`."""
    return QuarterDiskSampler(n_points=n_points, scheme=scheme, seed=seed).sample()
