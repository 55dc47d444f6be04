"""Entropic scaling solver: exact block updates, dual monotonicity, and the
three strategy-side modes."""

import numpy as np
import pytest

from cournot import (
    ArcQuadraticCost,
    CongestionSpec,
    CostModel,
    GibbsKernel,
    Grid1D,
    GridMismatchError,
    SolverConfig,
    lp_transport_on_grid,
    quadratic_interaction_spec,
    quarter_disk,
    solve_bestreply,
    solve_congestion,
    solve_sinkhorn,
    uniform_measure,
    wasserstein1_1d,
)
from cournot.sinkhorn import (
    dual_objective,
    u_update,
    v_update_congestion,
    v_update_marginal,
)
import cournot.sinkhorn as sinkhorn_module


class _BrokenCost(CostModel):
    def c(self, x, y):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(x[..., 0].shape,
                                           np.asarray(y, dtype=float).shape))
        out.flat[0] = np.inf
        return out


@pytest.fixture(scope="module")
def small_kernel():
    cost = ArcQuadraticCost()
    cloud = quarter_disk(100)
    grid = Grid1D(0.0, np.pi / 2, 30)
    return cost, cloud, grid, GibbsKernel(cost, cloud, grid, 0.05)


class TestGibbsKernel:
    def test_eps_validation(self, quad_cost, cloud_small, grid_half_pi):
        with pytest.raises(ValueError, match="eps"):
            GibbsKernel(quad_cost, cloud_small, grid_half_pi, 0.0)

    def test_nonfinite_cost_rejected(self, cloud_small, grid_half_pi):
        with pytest.raises(ValueError, match="non-finite"):
            GibbsKernel(_BrokenCost(), cloud_small, grid_half_pi, 0.1)

    def test_u_update_makes_rows_exact(self, small_kernel):
        _, cloud, _, kernel = small_kernel
        rng = np.random.default_rng(0)
        for _ in range(5):
            v = rng.normal(scale=0.3, size=30)
            u = kernel.u_update(v)
            rows = kernel.row_masses(u, v)
            assert np.max(np.abs(rows - cloud.weights)) <= 1e-12

    def test_coupling_matches_mass_functions(self, small_kernel):
        _, cloud, grid, kernel = small_kernel
        v = np.linspace(-0.1, 0.1, 30)
        u = kernel.u_update(v)
        gamma = kernel.coupling(u, v)
        assert np.allclose(gamma.sum(axis=1), kernel.row_masses(u, v), atol=1e-14)
        assert np.allclose(gamma.sum(axis=0), kernel.column_masses(u, v), atol=1e-14)
        assert abs(gamma.sum() - kernel.total_mass(u, v)) < 1e-12

    def test_coupling_size_guard(self, small_kernel, monkeypatch):
        _, _, _, kernel = small_kernel
        monkeypatch.setattr(sinkhorn_module, "_COUPLING_ENTRY_LIMIT", 10)
        with pytest.raises(ValueError, match="dense coupling"):
            kernel.coupling(np.zeros(100), np.zeros(30))


class TestBlockUpdates:
    def test_v_update_marginal_makes_columns_exact(self, small_kernel):
        _, _, grid, kernel = small_kernel
        target = uniform_measure(grid, support=(0.2, 1.2))
        u = kernel.u_update(np.zeros(30))
        v = v_update_marginal(kernel, u, target)
        cols = kernel.column_masses(u, v)
        assert np.max(np.abs(cols - target.cell_masses)) <= 1e-12

    def test_v_update_marginal_empty_cells(self, small_kernel):
        _, _, grid, kernel = small_kernel
        target = uniform_measure(grid, support=(0.2, 1.2))
        u = kernel.u_update(np.zeros(30))
        v = v_update_marginal(kernel, u, target)
        empty = target.cell_masses == 0.0
        assert np.all(np.isneginf(v[empty]))
        assert np.all(np.isfinite(v[~empty]))

    def test_v_update_congestion_closed_form_vs_numeric(self, small_kernel):
        _, _, _, kernel = small_kernel
        spec = CongestionSpec(potential=lambda y: 10.0 * (y - 0.1) ** 2)
        u = kernel.u_update(np.zeros(30))
        v_auto = v_update_congestion(kernel, u, spec, method="auto")
        v_num = v_update_congestion(kernel, u, spec, method="numeric")
        assert np.max(np.abs(v_auto - v_num)) <= 1e-8

    def test_v_update_congestion_method_validation(self, small_kernel):
        _, _, _, kernel = small_kernel
        with pytest.raises(ValueError, match="method"):
            v_update_congestion(kernel, np.zeros(100), CongestionSpec(),
                                method="newton")

    def test_dual_objective_rejects_interaction(self, small_kernel):
        _, _, _, kernel = small_kernel
        spec = quadratic_interaction_spec(0.3)
        with pytest.raises(TypeError):
            dual_objective(kernel, np.zeros(100), np.zeros(30), spec)


class TestDualMonotonicity:
    @pytest.mark.parametrize("mode", ["marginal", "congestion"])
    def test_alternating_updates_never_decrease_dual(self, mode):
        cost = ArcQuadraticCost()
        cloud = quarter_disk(100)
        grid = Grid1D(0.0, np.pi / 2, 25)
        kernel = GibbsKernel(cost, cloud, grid, 0.05)
        if mode == "marginal":
            functional = uniform_measure(grid)
        else:
            functional = CongestionSpec(potential=lambda y: 3.0 * y ** 2)
        u = np.zeros(100)
        v = np.zeros(25)
        values = []
        for _ in range(30):
            if mode == "marginal":
                v = v_update_marginal(kernel, u, functional)
                u = u_update(kernel, v)
            else:
                u = u_update(kernel, v)
                v = v_update_congestion(kernel, u, functional)
            values.append(dual_objective(kernel, u, v, functional))
        d = np.array(values)
        slack = 1e-9 * np.maximum(1.0, np.abs(d[:-1]))
        assert np.all(np.diff(d) >= -slack)


class TestSolveSinkhorn:
    def test_marginal_mode_converges_to_target(self, quad_cost):
        cloud = quarter_disk(400)
        grid = Grid1D(0.0, np.pi / 2, 40)
        target = uniform_measure(grid)
        result = solve_sinkhorn(quad_cost, cloud, target, grid, 0.05,
                                SolverConfig(max_iters=2000, tol_l1=1e-10),
                                return_coupling=True)
        assert result.converged
        assert result.diagnostics["mode"] == "marginal"
        assert result.diagnostics["row_marginal_error"] <= 1e-12
        assert np.max(np.abs(result.coupling.sum(axis=0)
                             - target.cell_masses)) <= 1e-9
        assert wasserstein1_1d(result.nu, target) <= grid.dy

    def test_marginal_cost_dominates_lp(self, quad_cost):
        cloud = quarter_disk(100)
        grid = Grid1D(0.0, np.pi / 2, 30)
        target = uniform_measure(grid)
        result = solve_sinkhorn(quad_cost, cloud, target, grid, 0.05,
                                SolverConfig(max_iters=4000, tol_l1=1e-12))
        lp = lp_transport_on_grid(quad_cost, cloud, target)
        assert result.diagnostics["transport_cost"] >= lp.value - 1e-9

    def test_dual_history_nondecreasing(self, quad_cost):
        cloud = quarter_disk(400)
        grid = Grid1D(0.0, np.pi / 6, 40)
        spec = CongestionSpec(potential=lambda y: 10.0 * (y - 0.1) ** 2)
        result = solve_sinkhorn(quad_cost, cloud, spec, grid, 0.01,
                                SolverConfig(max_iters=4000, tol_l1=1e-10))
        assert result.converged
        d = np.array(result.diagnostics["dual_history"])
        slack = 1e-9 * np.maximum(1.0, np.abs(d[:-1]))
        assert np.all(np.diff(d) >= -slack)

    def test_congestion_mode_matches_fixed_point(self, quad_cost, cloud_small):
        grid = Grid1D(0.0, np.pi / 6, 60)
        spec = CongestionSpec(potential=lambda y: 10.0 * (y - 0.1) ** 2)
        entropic = solve_sinkhorn(quad_cost, cloud_small, spec, grid, 1e-2,
                                  SolverConfig(max_iters=2000, tol_l1=1e-7))
        fixed = solve_congestion(quad_cost, cloud_small, spec,
                                 uniform_measure(grid), SolverConfig())
        assert entropic.converged and fixed.converged
        assert wasserstein1_1d(entropic.nu, fixed.nu) <= 2.0 * grid.dy

    def test_interaction_mode_matches_bestreply(self, quad_cost, cloud_medium):
        grid = Grid1D(0.0, np.pi / 2, 100)
        spec = quadratic_interaction_spec(np.pi / 12, 1.0)
        nu0 = uniform_measure(grid, support=(0.0, np.pi / 6))
        entropic = solve_sinkhorn(quad_cost, cloud_medium, spec, grid, 1e-3,
                                  SolverConfig(max_iters=2000, tol_l1=1e-10),
                                  nu0=nu0)
        replies = solve_bestreply(quad_cost, cloud_medium, spec, nu0,
                                  SolverConfig())
        assert entropic.converged
        assert entropic.diagnostics["mode"] == "interaction"
        assert wasserstein1_1d(entropic.nu, replies.nu) <= 2.0 * grid.dy

    def test_smaller_eps_reduces_smoothing_bias(self, quad_cost):
        # against a fixed marginal the transport cost decreases toward the
        # unregularized optimum as eps shrinks
        cloud = quarter_disk(100)
        grid = Grid1D(0.0, np.pi / 2, 30)
        target = uniform_measure(grid)
        costs = []
        for eps in (0.1, 0.01):
            r = solve_sinkhorn(quad_cost, cloud, target, grid, eps,
                               SolverConfig(max_iters=4000, tol_l1=1e-12))
            costs.append(r.diagnostics["transport_cost"])
        assert costs[1] <= costs[0] + 1e-9

    def test_functional_type_rejected(self, quad_cost, cloud_small,
                                      grid_half_pi):
        with pytest.raises(TypeError, match="functional"):
            solve_sinkhorn(quad_cost, cloud_small, object(), grid_half_pi, 0.1)

    def test_marginal_grid_mismatch(self, quad_cost, cloud_small):
        grid = Grid1D(0.0, np.pi / 2, 30)
        target = uniform_measure(Grid1D(0.0, np.pi / 2, 31))
        with pytest.raises(GridMismatchError):
            solve_sinkhorn(quad_cost, cloud_small, target, grid, 0.1)

    def test_nu0_grid_mismatch(self, quad_cost, cloud_small):
        grid = Grid1D(0.0, np.pi / 2, 30)
        spec = quadratic_interaction_spec(np.pi / 12)
        nu0 = uniform_measure(Grid1D(0.0, np.pi / 2, 31))
        with pytest.raises(GridMismatchError):
            solve_sinkhorn(quad_cost, cloud_small, spec, grid, 0.1, nu0=nu0)
