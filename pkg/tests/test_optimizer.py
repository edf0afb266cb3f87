import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manetcap.errors import DomainError
from manetcap.optimizer import (
    capacity_vs_alpha,
    h_poly,
    objective,
    optimal_capacity,
    scaling_limit,
    solve_gamma_star,
    stationarity_residual,
)
from manetcap.scheduling import GtsGeometry, LtsGeometry, lts_capacity, lts_contact_probabilities


def h_direct(gamma, n, B):
    C = [math.comb(n - 3 + i, i) for i in range(B + 1)]
    return sum(C[i] * gamma ** (B - i) for i in range(B)), C[B]


def g_direct(gamma, n, B):
    h, cb = h_direct(gamma, n, B)
    return (1 + gamma) * (1 + cb / h)


class TestHPoly:
    def test_single_term(self):
        assert h_poly(3.7, 10, 1) == pytest.approx((3.7, 1.0), rel=1e-15)

    def test_small_case(self):
        h, dh = h_poly(1.0, 4, 2)
        assert h == pytest.approx(3.0, rel=1e-15)
        assert dh == pytest.approx(4.0, rel=1e-15)

    @given(st.integers(4, 60), st.integers(1, 30), st.floats(0.2, 20.0))
    def test_against_direct_sum(self, n, B, gamma):
        h, _ = h_poly(gamma, n, B)
        assert h == pytest.approx(h_direct(gamma, n, B)[0], rel=1e-12)

    @given(st.integers(4, 200), st.integers(1, 40), st.floats(0.5, 10.0))
    def test_derivative_central_difference(self, n, B, gamma):
        step = 1e-6
        _, dh = h_poly(gamma, n, B)
        fd = (h_poly(gamma + step, n, B)[0] - h_poly(gamma - step, n, B)[0]) / (2 * step)
        assert dh == pytest.approx(fd, rel=1e-6)

    def test_huge_arguments_finite(self):
        assert math.isfinite(objective(2.0, 10**5, 5000))

    def test_domain(self):
        with pytest.raises(DomainError):
            h_poly(0.0, 10, 2)
        with pytest.raises(DomainError):
            h_poly(1.0, 3, 2)


class TestGammaStar:
    def test_closed_form_single_buffer(self):
        assert solve_gamma_star(6, 1) == pytest.approx(2.0, abs=1e-12)
        assert solve_gamma_star(4, 1) == pytest.approx(math.sqrt(2), abs=1e-12)
        for n in range(4, 101):
            assert abs(solve_gamma_star(n, 1) - math.sqrt(n - 2)) < 1e-9

    @pytest.mark.parametrize("n,B", [(6, 1), (4, 1), (10, 3), (30, 5)])
    def test_grid_oracle(self, n, B):
        grid = np.arange(1.0 + 1e-5, 10.0, 1e-5)
        C = np.array([math.comb(n - 3 + i, i) for i in range(B + 1)], dtype=float)
        powers = B - np.arange(B)
        h = (C[:B, None] * grid[None, :] ** powers[:, None]).sum(axis=0)
        g = (1 + grid) * (1 + C[B] / h)
        assert abs(solve_gamma_star(n, B) - grid[np.argmin(g)]) <= 1e-5

    def test_greater_than_one_on_sweep(self):
        for n in range(8, 257, 8):
            for B in range(1, 65):
                assert solve_gamma_star(n, B) > 1.0

    @settings(max_examples=60)
    @given(st.integers(4, 2000), st.integers(1, 500))
    def test_normalised_residual(self, n, B):
        gamma = solve_gamma_star(n, B)
        assert gamma > 1.0
        assert abs(stationarity_residual(gamma, n, B)) < 1e-9

    @settings(max_examples=40)
    @given(st.integers(4, 300), st.integers(1, 80))
    def test_local_minimum(self, n, B):
        gamma = solve_gamma_star(n, B)
        g0 = objective(gamma, n, B)
        for delta in (1e-4, 1e-2, 1e-1):
            assert objective(gamma - delta, n, B) >= g0
            assert objective(gamma + delta, n, B) >= g0

    def test_residual_is_derivative(self):
        n, B, gamma = 40, 6, 3.3
        step = 1e-6
        fd = (g_direct(gamma + step, n, B) - g_direct(gamma - step, n, B)) / (2 * step)
        assert stationarity_residual(gamma, n, B) == pytest.approx(fd, rel=1e-6)

    def test_alpha_star_monotone_on_sweep(self):
        ns = list(range(8, 257, 8))
        A = np.array([[1 / (1 + solve_gamma_star(n, B)) for B in range(1, 65)] for n in ns])
        assert np.all(np.diff(A, axis=1) >= -1e-12)
        assert np.all(np.diff(A, axis=0) <= 1e-12)

    def test_alpha_star_approaches_half(self):
        # 0.5 - alpha* shrinks like (n - 2) / B, with slope close to 1/4.
        for n in (10, 72, 200):
            gaps = [0.5 - 1 / (1 + solve_gamma_star(n, B)) for B in (10**2, 10**3, 10**4)]
            assert gaps[0] > gaps[1] > gaps[2] > 0
            assert 0.2 < gaps[-1] * 10**4 / (n - 2) < 0.3
        assert abs(1 / (1 + solve_gamma_star(10, 1000)) - 0.5) < 0.01


class TestOptimalCapacity:
    def test_case_one(self):
        g = LtsGeometry(72, 6)
        res = optimal_capacity("lts", g, 5)
        assert res.alpha_star < 0.5 and res.gamma_star > 1
        assert res.alpha_star == pytest.approx(1 / (1 + res.gamma_star), rel=1e-15)
        assert res.t_c_star == pytest.approx(lts_capacity(g, 5, res.alpha_star).t_c, rel=1e-12)

    @pytest.mark.parametrize("scheme,geom,B", [
        ("lts", LtsGeometry(72, 6), 5),
        ("lts", LtsGeometry(200, 10), 8),
        ("gts", GtsGeometry(200, 10), 8),
        ("lts", LtsGeometry(16, 4), 40),
    ])
    def test_beats_alpha_grid(self, scheme, geom, B):
        res = optimal_capacity(scheme, geom, B)
        grid = capacity_vs_alpha(scheme, geom, B, np.linspace(0, 1, 1001))
        assert res.t_c_star >= grid.max() - 1e-10
        assert res.residual < 1e-9

    def test_scheme_geometry_mismatch(self):
        with pytest.raises(DomainError):
            optimal_capacity("gts", LtsGeometry(72, 6), 5)
        with pytest.raises(DomainError):
            optimal_capacity("xyz", LtsGeometry(72, 6), 5)


class TestScalingLimit:
    def test_relay_part_converges(self):
        # The limit keeps only the relay contribution; compare with the
        # capacity minus its direct S-D term.
        for n, tol in ((10**3, 0.05), (10**5, 0.01)):
            g = LtsGeometry.from_density(n, 2.0)
            _, p1 = lts_contact_probabilities(g)
            relay = lts_capacity(g, 5, 0.5).t_c - p1 / g.d
            assert relay / scaling_limit(n, 2.0, 5, 0.5) == pytest.approx(1.0, abs=tol)

    def test_direct_term_dominates_at_small_buffer(self):
        g = LtsGeometry.from_density(10**5, 2.0)
        ratio = lts_capacity(g, 5, 0.5).t_c / scaling_limit(10**5, 2.0, 5, 0.5)
        assert ratio > 2.0

    def test_buffer_proportional_to_n(self):
        vals = []
        for n in (10**2, 10**3, 10**4):
            vals.append(lts_capacity(LtsGeometry.from_density(n, 2.0), n, 0.5).t_c)
        diffs = np.diff(vals)
        assert np.all(diffs < 0) and abs(diffs[1]) < abs(diffs[0])
        assert vals[-1] > 0.05

    def test_alpha_extremes(self):
        assert scaling_limit(1000, 2.0, 5, 1 - 1e-9) < 1e-9
        # Near alpha = 0 the limit settles at a positive value, not zero.
        small = [scaling_limit(1000, 2.0, 5, a) for a in (1e-6, 1e-9)]
        assert small[1] > 1e-3 and small[1] == pytest.approx(small[0], rel=1e-5)
        with pytest.raises(DomainError):
            scaling_limit(1000, 2.0, 5, 0.0)
        with pytest.raises(DomainError):
            scaling_limit(1000, 2.0, 5, 1.0)
