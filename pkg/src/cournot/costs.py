"""Cost models on (type, strategy) pairs with the derivatives the transport
construction needs.

A cost model evaluates ``c(x, y)`` for types ``x`` in ``R^2`` and scalar
strategies ``y``, together with ``dy_c`` (first strategy derivative),
``dyy_c`` (second), and ``grad_x_dy_c`` (type gradient of ``dy_c``, the
cross-derivative field whose norm enters the level-curve line integrals).
All methods broadcast: ``x`` has shape ``(..., 2)`` and ``y`` broadcasts
against ``x[..., 0]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CostModel",
    "ArcQuadraticCost",
    "ArcPowerCost",
    "DerivativeReport",
    "check_derivatives",
    "dy_c_range",
    "cost_from_config",
]


class CostModel:
    """Interface for smooth costs on ``R^2 x R``."""

    def c(self, x, y):
        raise NotImplementedError

    def dy_c(self, x, y):
        raise NotImplementedError

    def dyy_c(self, x, y):
        raise NotImplementedError

    def grad_x_dy_c(self, x, y):
        """Gradient in ``x`` of ``dy_c``; shape ``broadcast(x[..., 0], y) + (2,)``."""
        raise NotImplementedError

    # matrix helpers for point-cloud x grid evaluation
    def c_matrix(self, points, ys):
        return self.c(np.asarray(points)[:, None, :], np.asarray(ys)[None, :])

    def dy_c_matrix(self, points, ys):
        return self.dy_c(np.asarray(points)[:, None, :], np.asarray(ys)[None, :])


@dataclass(frozen=True)
class ArcQuadraticCost(CostModel):
    """Squared distance to the unit arc point ``e(y) = (cos y, sin y)``:

    ``c(x, y) = |x1 - cos y|^2 + |x2 - sin y|^2``.
    """

    def c(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d1 = x[..., 0] - np.cos(y)
        d2 = x[..., 1] - np.sin(y)
        return d1 * d1 + d2 * d2

    def dy_c(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        # d/dy [ -2 x.e(y) ] = 2 (x1 sin y - x2 cos y)
        return 2.0 * (x[..., 0] * np.sin(y) - x[..., 1] * np.cos(y))

    def dyy_c(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return 2.0 * (x[..., 0] * np.cos(y) + x[..., 1] * np.sin(y))

    def grad_x_dy_c(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x[..., 0].shape, y.shape)
        out = np.empty(shape + (2,))
        out[..., 0] = np.broadcast_to(2.0 * np.sin(y), shape)
        out[..., 1] = np.broadcast_to(-2.0 * np.cos(y), shape)
        return out


@dataclass(frozen=True)
class ArcPowerCost(CostModel):
    """Power cost ``c(x, y) = (1 + |x - e(y)|^2)^(p/2)`` with ``p > 2``.

    Writing ``s = 1 + |x - e(y)|^2`` and ``q = p/2``:

    ``s_y   = 2 (x1 sin y - x2 cos y)``
    ``s_yy  = 2 (x1 cos y + x2 sin y)``
    ``dy_c  = q s^(q-1) s_y``
    ``dyy_c = q (q-1) s^(q-2) s_y^2 + q s^(q-1) s_yy``
    ``grad_x dy_c = q (q-1) s^(q-2) s_y * grad_x s + q s^(q-1) * grad_x s_y``
    with ``grad_x s = 2 (x1 - cos y, x2 - sin y)`` and
    ``grad_x s_y = (2 sin y, -2 cos y)``.
    """

    p: float = 4.0

    def __post_init__(self):
        if not self.p > 2:
            raise ValueError(f"power cost requires p > 2, got {self.p}")

    def _s(self, x, y):
        d1 = x[..., 0] - np.cos(y)
        d2 = x[..., 1] - np.sin(y)
        return 1.0 + d1 * d1 + d2 * d2

    def c(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self._s(x, y) ** (self.p / 2.0)

    def dy_c(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        q = self.p / 2.0
        s = self._s(x, y)
        s_y = 2.0 * (x[..., 0] * np.sin(y) - x[..., 1] * np.cos(y))
        return q * s ** (q - 1.0) * s_y

    def dyy_c(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        q = self.p / 2.0
        s = self._s(x, y)
        s_y = 2.0 * (x[..., 0] * np.sin(y) - x[..., 1] * np.cos(y))
        s_yy = 2.0 * (x[..., 0] * np.cos(y) + x[..., 1] * np.sin(y))
        return q * (q - 1.0) * s ** (q - 2.0) * s_y * s_y + q * s ** (q - 1.0) * s_yy

    def grad_x_dy_c(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        q = self.p / 2.0
        s = self._s(x, y)
        s_y = 2.0 * (x[..., 0] * np.sin(y) - x[..., 1] * np.cos(y))
        coeff = q * (q - 1.0) * s ** (q - 2.0) * s_y
        lead = q * s ** (q - 1.0)
        shape = np.broadcast_shapes(x[..., 0].shape, y.shape)
        out = np.empty(shape + (2,))
        out[..., 0] = coeff * 2.0 * (x[..., 0] - np.cos(y)) + lead * 2.0 * np.sin(y)
        out[..., 1] = coeff * 2.0 * (x[..., 1] - np.sin(y)) + lead * (-2.0 * np.cos(y))
        return out


@dataclass(frozen=True)
class DerivativeReport:
    max_err_dy_c: float
    max_err_dyy_c: float
    max_err_grad_x_dy_c: float
    n_samples: int
    step: float

    @property
    def max_err(self) -> float:
        return max(self.max_err_dy_c, self.max_err_dyy_c, self.max_err_grad_x_dy_c)


def check_derivatives(cost: CostModel, n_samples: int = 200, seed: int = 0,
                      y_range: tuple[float, float] = (0.05, np.pi / 2 - 0.05),
                      step: float = 1e-5) -> DerivativeReport:
    """Compare analytic derivatives against centered finite differences.

    Errors are relative above unit scale and absolute below it
    (denominator ``max(1, |analytic|)``), evaluated at random quarter-disk
    points and strategies in ``y_range``.
    """
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.random(n_samples)) * 0.95 + 0.02
    th = rng.random(n_samples) * (np.pi / 2 - 0.04) + 0.02
    x = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    y = rng.uniform(y_range[0], y_range[1], size=n_samples)

    def rel(a, f):
        return np.max(np.abs(a - f) / np.maximum(1.0, np.abs(a)))

    fd_dy = (cost.c(x, y + step) - cost.c(x, y - step)) / (2 * step)
    err_dy = rel(cost.dy_c(x, y), fd_dy)

    fd_dyy = (cost.dy_c(x, y + step) - cost.dy_c(x, y - step)) / (2 * step)
    err_dyy = rel(cost.dyy_c(x, y), fd_dyy)

    e1 = np.zeros_like(x)
    e1[:, 0] = step
    e2 = np.zeros_like(x)
    e2[:, 1] = step
    fd_g1 = (cost.dy_c(x + e1, y) - cost.dy_c(x - e1, y)) / (2 * step)
    fd_g2 = (cost.dy_c(x + e2, y) - cost.dy_c(x - e2, y)) / (2 * step)
    grad = cost.grad_x_dy_c(x, y)
    err_grad = max(rel(grad[..., 0], fd_g1), rel(grad[..., 1], fd_g2))

    return DerivativeReport(
        max_err_dy_c=float(err_dy),
        max_err_dyy_c=float(err_dyy),
        max_err_grad_x_dy_c=float(err_grad),
        n_samples=n_samples,
        step=step,
    )


def dy_c_range(cost: CostModel, mu, y: float) -> tuple[float, float]:
    """Attained range ``(k_lo, k_hi)`` of ``dy_c(x_i, y)`` over the cloud."""
    vals = cost.dy_c(mu.points, float(y))
    return float(vals.min()), float(vals.max())


def cost_from_config(config: dict) -> CostModel:
    """Build a cost model from a config mapping: ``{"cost": "arc_quadratic"}``
    or ``{"cost": "arc_power", "p": 4}``."""
    name = config.get("cost", "arc_quadratic")
    if name == "arc_quadratic":
        return ArcQuadraticCost()
    if name == "arc_power":
        return ArcPowerCost(p=float(config.get("p", 4.0)))
    raise ValueError(f"unknown cost {name!r}")
