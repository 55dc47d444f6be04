"""Exact transport oracle: hand-checkable instances, dominance over random
feasible plans, and the self-certifying duals."""

import dataclasses

import numpy as np
import pytest

from cournot import (
    ArcQuadraticCost,
    Grid1D,
    LPResult,
    lp_transport_on_grid,
    quarter_disk,
    solve_exact_ot,
    uniform_measure,
    wasserstein1_1d,
)
from cournot.lp import MAX_LP_ENTRIES


def _random_feasible_coupling(rng, r, c):
    """Northwest-corner plan after a random permutation of both margins."""
    pr = rng.permutation(r.size)
    pc = rng.permutation(c.size)
    a = r[pr].copy()
    b = c[pc].copy()
    gamma = np.zeros((r.size, c.size))
    i = j = 0
    while i < a.size and j < b.size:
        m = min(a[i], b[j])
        gamma[pr[i], pc[j]] = m
        a[i] -= m
        b[j] -= m
        if a[i] <= 1e-15:
            i += 1
        else:
            j += 1
    return gamma


class TestSmallInstances:
    def test_diagonal_two_by_two(self):
        C = np.array([[0.0, 1.0], [1.0, 0.0]])
        res = solve_exact_ot(C, np.array([0.5, 0.5]), np.array([0.5, 0.5]))
        assert res.value == 0.0
        assert np.allclose(res.coupling, np.diag([0.5, 0.5]))
        res.assert_certified()

    def test_single_row_forced_plan(self):
        C = np.array([[3.0, 1.0, 2.0]])
        r = np.array([1.0])
        c = np.array([0.2, 0.5, 0.3])
        res = solve_exact_ot(C, r, c)
        assert np.allclose(res.coupling, c[None, :])
        assert abs(res.value - (C[0] @ c)) < 1e-12
        res.assert_certified()

    def test_cost_shift_invariance(self):
        rng = np.random.default_rng(1)
        C = rng.random((6, 5))
        r = rng.random(6)
        r /= r.sum()
        c = rng.random(5)
        c /= c.sum()
        base = solve_exact_ot(C, r, c)
        shifted = solve_exact_ot(C + 2.5, r, c)
        assert abs(shifted.value - (base.value + 2.5)) < 1e-10
        assert np.allclose(shifted.coupling.sum(axis=0), c, atol=1e-12)

    def test_grid_distance_matches_cdf_formula(self):
        # with |y_i - y_j| costs between atoms on a shared grid the optimal
        # value is dy * sum |cumulative mass difference|
        rng = np.random.default_rng(2)
        g = Grid1D(0.0, 1.0, 20)
        a = rng.random(20)
        a /= a.sum()
        b = rng.random(20)
        b /= b.sum()
        C = np.abs(g.midpoints[:, None] - g.midpoints[None, :])
        res = solve_exact_ot(C, a, b)
        exact = g.dy * np.abs(np.cumsum(a - b))[:-1].sum()
        assert abs(res.value - exact) < 1e-10
        res.assert_certified()


class TestDominance:
    def test_no_feasible_plan_beats_the_oracle(self):
        rng = np.random.default_rng(3)
        C = rng.random((30, 30))
        r = rng.random(30)
        r /= r.sum()
        c = rng.random(30)
        c /= c.sum()
        res = solve_exact_ot(C, r, c)
        res.assert_certified()
        for _ in range(100):
            gamma = _random_feasible_coupling(rng, r, c)
            assert np.abs(gamma.sum(axis=1) - r).max() < 1e-12
            assert np.abs(gamma.sum(axis=0) - c).max() < 1e-12
            assert float((gamma * C).sum()) >= res.value - 1e-9


class TestCertificates:
    def test_certificates_near_zero_on_transport_instance(self):
        cost = ArcQuadraticCost()
        cloud = quarter_disk(100)
        nu = uniform_measure(Grid1D(0.0, np.pi / 2, 30))
        res = lp_transport_on_grid(cost, cloud, nu)
        assert res.dual_feasibility <= 1e-9
        assert res.complementary_slackness <= 1e-9
        assert res.duality_gap <= 1e-9
        assert res.row_error <= 1e-12 and res.col_error <= 1e-12
        res.assert_certified()

    def test_tampered_result_fails_certification(self):
        C = np.array([[0.0, 1.0], [1.0, 0.0]])
        res = solve_exact_ot(C, np.array([0.5, 0.5]), np.array([0.5, 0.5]))
        bad = dataclasses.replace(res, duality_gap=1.0)
        with pytest.raises(AssertionError, match="duality gap"):
            bad.assert_certified()

    def test_dual_value_matches_primal(self):
        rng = np.random.default_rng(4)
        C = rng.random((8, 7))
        r = rng.random(8)
        r /= r.sum()
        c = rng.random(7)
        c /= c.sum()
        res = solve_exact_ot(C, r, c)
        assert abs((res.u @ r + res.v @ c) - res.value) <= 1e-9


class TestValidation:
    def test_dimension_check(self):
        with pytest.raises(ValueError, match="two dimensional"):
            solve_exact_ot(np.zeros(4), np.ones(2) / 2, np.ones(2) / 2)

    def test_marginal_length_check(self):
        with pytest.raises(ValueError, match="marginal lengths"):
            solve_exact_ot(np.zeros((2, 3)), np.ones(2) / 2, np.ones(2) / 2)

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            solve_exact_ot(np.zeros((2, 2)), np.array([1.5, -0.5]),
                           np.array([0.5, 0.5]))

    def test_unbalanced_masses_rejected(self):
        with pytest.raises(ValueError, match="total masses differ"):
            solve_exact_ot(np.zeros((2, 2)), np.array([0.6, 0.6]),
                           np.array([0.5, 0.5]))

    def test_nonfinite_rejected(self):
        C = np.array([[0.0, np.nan], [1.0, 0.0]])
        with pytest.raises(ValueError, match="finite"):
            solve_exact_ot(C, np.array([0.5, 0.5]), np.array([0.5, 0.5]))

    def test_size_guard(self):
        n = int(np.sqrt(MAX_LP_ENTRIES)) + 1
        with pytest.raises(ValueError, match="exact-oracle limit"):
            solve_exact_ot(np.zeros((n, n)), np.ones(n) / n, np.ones(n) / n)


class TestGridHelper:
    def test_matches_direct_call(self):
        cost = ArcQuadraticCost()
        cloud = quarter_disk(49)
        nu = uniform_measure(Grid1D(0.0, np.pi / 2, 12))
        via_helper = lp_transport_on_grid(cost, cloud, nu)
        C = cost.c_matrix(cloud.points, nu.midpoints)
        direct = solve_exact_ot(C, cloud.weights, nu.cell_masses)
        assert abs(via_helper.value - direct.value) <= 1e-12

    def test_value_consistent_with_w1_bound(self):
        # transporting between a density and itself on the same grid is free
        cost = ArcQuadraticCost()
        cloud = quarter_disk(49)
        nu = uniform_measure(Grid1D(0.0, np.pi / 2, 12))
        res = lp_transport_on_grid(cost, cloud, nu)
        assert res.value > 0.0
        assert wasserstein1_1d(nu, nu) == 0.0
