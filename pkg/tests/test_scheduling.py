import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manetcap.errors import DomainError
from manetcap.scheduling import (
    GtsGeometry,
    LtsGeometry,
    gts_capacity,
    gts_contact_probabilities,
    gts_epsilon,
    gts_transmission_probabilities,
    lts_capacity,
    lts_contact_probabilities,
    lts_transmission_probabilities,
)


# ---------------------------------------------------------------- Monte Carlo placement oracle

def _placements(rng, samples, n, m):
    return rng.integers(0, m * m, size=(samples, n))


def _cell_counts(cells, m2):
    S = cells.shape[0]
    flat = cells + m2 * np.arange(S)[:, None]
    return np.bincount(flat.ravel(), minlength=S * m2).reshape(S, m2)


def _coverage(counts, m, reach):
    """Nodes within ``reach`` cells of each cell in both axes, no wraparound."""
    S = counts.shape[0]
    grid = counts.reshape(S, m, m)
    padded = np.pad(grid, ((0, 0), (reach, reach), (reach, reach)))
    out = np.zeros_like(grid)
    for dx in range(2 * reach + 1):
        for dy in range(2 * reach + 1):
            out += padded[:, dx:dx + m, dy:dy + m]
    return out.reshape(S, m * m)


def _pair_hits(cells, m, reach):
    """Per cell: does some S-D pair have one end there and the other in range?"""
    S, n = cells.shape
    a, b = cells[:, 0::2], cells[:, 1::2]
    close = (np.abs(a // m - b // m) <= reach) & (np.abs(a % m - b % m) <= reach)
    rows = np.repeat(np.arange(S)[:, None], n // 2, axis=1)
    hits = np.zeros((S, m * m), dtype=bool)
    hits[rows[close], a[close]] = True
    hits[rows[close], b[close]] = True
    return hits


def _estimate(events):
    """Mean and standard error using placements as independent units."""
    per_sample = events.mean(axis=1)
    return per_sample.mean(), per_sample.std(ddof=1) / math.sqrt(len(per_sample))


def mc_lts(n, m, samples, seed):
    rng = np.random.default_rng(seed)
    cells = _placements(rng, samples, n, m)
    counts = _cell_counts(cells, m * m)
    return _estimate(counts >= 2), _estimate(_pair_hits(cells, m, 0))


def mc_gts(n, m, nu, samples, seed):
    rng = np.random.default_rng(seed)
    reach = nu - 1
    cells = _placements(rng, samples, n, m)
    counts = _cell_counts(cells, m * m)
    cover = _coverage(counts, m, reach)
    two = (counts >= 1) & (cover >= 2)
    pair = _pair_hits(cells, m, reach)
    idx = np.arange(m)
    inner = (idx >= reach) & (idx < m - reach)
    keep = (inner[:, None] & inner[None, :]).ravel()
    return _estimate(two[:, keep]), _estimate(pair[:, keep])


def _within(value, est, sigmas=3.0):
    mean, se = est
    return abs(value - mean) <= sigmas * se + 1e-12


# ---------------------------------------------------------------- LTS

class TestLtsContacts:
    def test_single_cell(self):
        assert lts_contact_probabilities(LtsGeometry(2, 1)) == (1.0, 1.0)

    def test_two_nodes_four_cells(self):
        p0, p1 = lts_contact_probabilities(LtsGeometry(2, 2))
        assert p0 == pytest.approx(1 / 16, abs=1e-15)
        assert p1 == pytest.approx(1 / 16, abs=1e-15)
        rng = np.random.default_rng(7)
        both = rng.integers(0, 4, size=(10**7, 2))
        hit = (both[:, 0] == 0) & (both[:, 1] == 0)
        se = math.sqrt(p0 * (1 - p0) / hit.size)
        assert abs(hit.mean() - p0) <= 3 * se

    def test_case_one_monte_carlo(self):
        p0, p1 = lts_contact_probabilities(LtsGeometry(72, 6))
        est0, est1 = mc_lts(72, 6, 200_000, seed=11)
        assert _within(p0, est0)
        assert _within(p1, est1)

    def test_direct_powers(self):
        n, m = 72, 6
        c = m * m
        p0, p1 = lts_contact_probabilities(LtsGeometry(n, m))
        assert p0 == pytest.approx(1 - (1 - 1 / c) ** n - n / c * (1 - 1 / c) ** (n - 1), rel=1e-13)
        assert p1 == pytest.approx(1 - (1 - 1 / c**2) ** (n / 2), rel=1e-13)

    def test_large_n_stays_finite(self):
        geom = LtsGeometry.from_density(10**6, 2.0)
        p0, p1 = lts_contact_probabilities(geom)
        assert p0 == pytest.approx(1 - math.exp(-2) - 2 * math.exp(-2), rel=1e-5)
        assert 0 < p1 < 1e-5

    @given(st.integers(1, 500).map(lambda k: 2 * k), st.integers(1, 60))
    def test_ordering(self, n, m):
        p0, p1 = lts_contact_probabilities(LtsGeometry(n, m))
        assert 0.0 <= p1 <= p0 <= 1.0

    @pytest.mark.parametrize("n", [3, 0, 7])
    def test_odd_or_small_n_rejected(self, n):
        with pytest.raises(DomainError):
            LtsGeometry(n, 4)


class TestLtsProbabilities:
    def test_alpha_extremes(self):
        g = LtsGeometry(72, 6)
        assert lts_transmission_probabilities(g, 0.0).p_sr == 0.0
        assert lts_transmission_probabilities(g, 1.0).p_rd == 0.0

    def test_symmetric_at_half(self):
        p = lts_transmission_probabilities(LtsGeometry(72, 6), 0.5)
        assert p.p_sr == p.p_rd

    @given(st.integers(2, 300).map(lambda k: 2 * k), st.integers(1, 40), st.floats(0.0, 1.0))
    def test_opportunity_conservation(self, n, m, alpha):
        g = LtsGeometry(n, m)
        p = lts_transmission_probabilities(g, alpha)
        p0, _ = lts_contact_probabilities(g)
        assert abs(n * (p.p_sd + p.p_sr + p.p_rd) - m * m * p0) < 1e-12 * max(1.0, n)

    def test_capacity_alpha_zero(self):
        g = LtsGeometry(72, 6)
        _, p1 = lts_contact_probabilities(g)
        assert lts_capacity(g, 5, 0.0).t_c == pytest.approx(p1 / g.d, abs=1e-16)

    def test_large_buffer_at_half(self):
        # Matches the limit (p0 + p1) / (2d) up to the exact remainder
        # (p0 - p1) / (2d) * (n - 2) / (n - 2 + B).
        g = LtsGeometry(72, 6)
        p0, p1 = lts_contact_probabilities(g)
        B = 10**4
        limit = (p0 + p1) / (2 * g.d)
        gap = limit - lts_capacity(g, B, 0.5).t_c
        assert gap == pytest.approx((p0 - p1) / (2 * g.d) * (g.n - 2) / (g.n - 2 + B), rel=1e-9)
        assert lts_capacity(g, 10**6, 0.5).t_c == pytest.approx(limit, rel=1e-4)


# ---------------------------------------------------------------- GTS

class TestGtsEpsilon:
    def test_values(self):
        assert gts_epsilon(1, 1.0, 10) == 4
        assert gts_epsilon(1, 1.0, 3) == 3
        assert gts_epsilon(2, 0.0, 20) == 5

    def test_geometry(self):
        g = GtsGeometry(200, 10, 1, 1.0)
        assert (g.epsilon, g.J, g.l) == (4, 6, 1)
        g = GtsGeometry(200, 20, 2, 0.0)
        assert (g.epsilon, g.J, g.l) == (5, 16, 9)

    def test_domain(self):
        with pytest.raises(DomainError):
            gts_epsilon(0, 1.0, 10)
        with pytest.raises(DomainError):
            GtsGeometry(200, 10, 6, 1.0)
        with pytest.raises(DomainError):
            GtsGeometry(201, 10)


class TestGtsContacts:
    def test_nu_one_matches_cell_form(self):
        g = GtsGeometry(200, 10, 1, 1.0)
        p3, p4 = gts_contact_probabilities(g)
        p0, p1 = lts_contact_probabilities(LtsGeometry(200, 10))
        assert p3 == pytest.approx(p0, rel=1e-14)
        assert p4 == pytest.approx(p1, rel=1e-14)

    def test_common_denominator_form(self):
        # Exact rational evaluation of the expressions over m^(2n).
        n, m, nu = 20, 5, 2
        g = GtsGeometry(n, m, nu, 0.0)
        l, c = g.l, m * m
        p3_ref = Fraction(c**n - (c - 1) ** n - n * (c - l) ** (n - 1), c**n)
        p4_ref = Fraction(c ** (2 * (n // 2)) - (c * c - 2 * l + 1) ** (n // 2), c**n)
        p3, p4 = gts_contact_probabilities(g)
        assert p3 == pytest.approx(float(p3_ref), rel=1e-12)
        assert p4 == pytest.approx(float(p4_ref), rel=1e-12)

    def test_case_two_monte_carlo(self):
        p3, p4 = gts_contact_probabilities(GtsGeometry(200, 10, 1, 1.0))
        est3, est4 = mc_gts(200, 10, 1, 100_000, seed=5)
        assert _within(p3, est3)
        assert _within(p4, est4)

    def test_wider_range_monte_carlo(self):
        # nu = 2 at interior cells: the mixed-base expression is the exact
        # probability of a node in the cell plus another within range.
        p3, p4 = gts_contact_probabilities(GtsGeometry(60, 10, 2, 0.0))
        est3, est4 = mc_gts(60, 10, 2, 100_000, seed=9)
        assert _within(p3, est3)
        assert _within(p4, est4)

    @given(st.integers(2, 200).map(lambda k: 2 * k), st.integers(3, 30), st.integers(1, 2))
    def test_ordering(self, n, m, nu):
        p3, p4 = gts_contact_probabilities(GtsGeometry(n, m, nu, 1.0))
        assert 0.0 <= p4 <= p3 <= 1.0


class TestGtsProbabilities:
    @given(st.integers(2, 300).map(lambda k: 2 * k), st.integers(4, 30), st.floats(0.0, 1.0))
    def test_opportunity_conservation(self, n, m, alpha):
        g = GtsGeometry(n, m, 1, 1.0)
        p = gts_transmission_probabilities(g, alpha)
        p3, _ = gts_contact_probabilities(g)
        assert abs(n * (p.p_sd + p.p_sr + p.p_rd) - g.J * p3) < 1e-12 * max(1.0, n)

    def test_capacity_alpha_zero(self):
        g = GtsGeometry(200, 10)
        _, p4 = gts_contact_probabilities(g)
        assert gts_capacity(g, 8, 0.0).t_c == pytest.approx(g.J / g.n * p4, abs=1e-16)

    def test_large_buffer_at_half(self):
        g = GtsGeometry(200, 10)
        p3, p4 = gts_contact_probabilities(g)
        B = 10**4
        limit = g.J * (p3 + p4) / (2 * g.n)
        gap = limit - gts_capacity(g, B, 0.5).t_c
        relay = g.J * (p3 - p4) / (2 * g.n)
        assert gap == pytest.approx(relay * (g.n - 2) / (g.n - 2 + B), rel=1e-9)
