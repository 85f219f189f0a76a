import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberband.errors import NumericalError, ValidationError
from oracles import square_well_count

from fiberband.effective import (
    CurvatureProfile,
    EffectiveOperator1D,
    PerturbationField,
    circle_profile,
    count_negative,
    effective_halfplane,
    ellipse_profile,
    harmonic_levels,
    phase_space_count,
    robin_effective_boundary,
    robin_halfline,
    robin_sector_numeric,
    sector_matrix,
)


def well(depth: float, a: float):
    return lambda y: np.where(np.abs(y) < a, -depth, 0.0)


# (μ, depth, a), each with z₀ well away from multiples of π/2
SQUARE_WELLS = [(0.5, 1.0, 1.0), (0.585, 2.0, 3.0), (1.0, 5.0, 2.0), (0.25, 0.3, 4.0), (2.0, 10.0, 5.0)]


class TestSquareWell:
    @pytest.mark.parametrize("mu, depth, a", SQUARE_WELLS)
    def test_matches_transcendental_oracle(self, mu, depth, a):
        z0 = a * math.sqrt(depth / mu)
        assert min(abs(z0 / (math.pi / 2) - n) for n in range(40)) > 0.05
        op = EffectiveOperator1D.line(mu, well(depth, a), y_max=4 * a + 10, n=4000)
        assert count_negative(op) == square_well_count(mu, depth, a) == math.ceil(2 * z0 / math.pi)

    def test_zero_potential(self):
        op = EffectiveOperator1D.line(0.6, lambda y: np.zeros_like(y), 10.0, 200)
        assert count_negative(op) == 0

    @given(st.floats(0.1, 5.0), st.floats(1.01, 3.0))
    def test_monotone_in_depth(self, depth, factor):
        ops = [EffectiveOperator1D.line(1.0, well(d, 1.5), 12.0, 600) for d in (depth, depth * factor)]
        assert ops[0].count_below(0.0) <= ops[1].count_below(0.0)

    def test_unconverged_count_raises(self):
        # a well narrower than the grid spacing is seen differently by the doubled grid
        op = EffectiveOperator1D.line(1.0, well(40.0, 0.02), 5.0, 100)
        with pytest.raises(NumericalError, match="unconverged count"):
            count_negative(op)


class TestSturmCounts:
    @settings(max_examples=20)
    @given(st.integers(16, 400), st.sampled_from(["line", "circle"]), st.integers(0, 2**32 - 1))
    def test_count_matches_dense(self, n, geometry, seed):
        rng = np.random.default_rng(seed)
        pot = rng.normal(scale=3.0, size=n)
        op = EffectiveOperator1D(0.7, pot, geometry, y_min=0.0, y_max=1.0, length=1.0)
        evals = np.linalg.eigvalsh(op.dense())
        for value in rng.normal(scale=5.0, size=5):
            value += op.entries()[0].mean()
            assert op.count_below(value) == int(np.sum(evals < value))

    def test_eigenvalues_match_dense(self):
        op = EffectiveOperator1D(1.0, np.linspace(-1, 1, 200) ** 2, "circle", length=3.0)
        np.testing.assert_allclose(op.eigenvalues(5), np.linalg.eigvalsh(op.dense())[:5], rtol=0, atol=1e-10)

    def test_validation(self):
        with pytest.raises(ValidationError):
            EffectiveOperator1D(0.0, np.zeros(20))
        with pytest.raises(ValidationError):
            EffectiveOperator1D(1.0, np.zeros(8))
        with pytest.raises(ValidationError):
            EffectiveOperator1D(1.0, np.zeros(20), "torus")


@pytest.fixture(scope="module")
def theta():
    from fiberband.bands import theta0

    return theta0()


class TestEffectiveHalfplane:
    def test_mass_is_half_curvature(self, theta):
        V = PerturbationField(lambda x, y: np.exp(-(x * x + y * y)), decay=math.inf)
        op = effective_halfplane(V, y_max=10.0, n=400, theta=theta)
        assert op.mass == pytest.approx(0.5 * theta.second_derivative)

    def test_far_support_gives_vanishing_potential(self, theta):
        V = PerturbationField(lambda x, y: np.exp(-((x - 40.0) ** 2 + y * y)), decay=math.inf)
        op = effective_halfplane(V, y_max=10.0, n=400, theta=theta)
        assert np.max(np.abs(op.potential)) < 1e-12
        assert count_negative(op) == 0

    def test_potential_is_weighted_average(self, theta):
        # V independent of x: v(y) = V(y)·∫u² = V(y)
        V = PerturbationField(lambda x, y: np.exp(-y * y) + 0 * x, decay=math.inf)
        op = effective_halfplane(V, y_max=5.0, n=200, theta=theta)
        np.testing.assert_allclose(-op.potential, np.exp(-op.nodes**2), rtol=1e-6)


class TestPhaseSpace:
    def test_half_disc(self):
        V = PerturbationField(lambda x, y: (x * x + y * y < 1.0).astype(float))
        assert phase_space_count(V, 0.5) == pytest.approx(0.25, rel=5e-3)

    @pytest.mark.parametrize("m, lam", [(1.0, 0.2), (2.0, 0.05), (3.0, 0.01)])
    def test_power_law(self, m, lam):
        V = PerturbationField(lambda x, y: (1 + x * x + y * y) ** (-m / 2), decay=m)
        exact = (lam ** (-2 / m) - 1) / 4
        assert phase_space_count(V, lam) == pytest.approx(exact, rel=5e-3)

    def test_above_maximum(self):
        V = PerturbationField(lambda x, y: 0.5 * np.exp(-(x * x + y * y)))
        assert phase_space_count(V, 0.6) == 0.0

    @given(st.floats(0.5, 4.0))
    @settings(max_examples=10)
    def test_scaling(self, s):
        base = lambda x, y: np.exp(-((x - 1) ** 2 + 2 * y * y))  # noqa: E731
        V1 = PerturbationField(base)
        Vs = PerturbationField(lambda x, y: base(x / s, y / s))
        assert phase_space_count(Vs, 0.3) == pytest.approx(s * s * phase_space_count(V1, 0.3), rel=1e-2)

    def test_nonincreasing(self):
        V = PerturbationField(lambda x, y: (1 + x * x + y * y) ** -1.0, decay=2.0)
        counts = [phase_space_count(V, lam) for lam in (0.05, 0.1, 0.2, 0.4, 0.8)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_rejects_nonpositive_level(self):
        with pytest.raises(ValidationError):
            phase_space_count(PerturbationField(lambda x, y: x * 0), 0.0)


class TestRobin:
    def test_halfline(self):
        res = robin_halfline()
        assert res.value == pytest.approx(-1.0, abs=1e-6)
        i = np.searchsorted(res.x, 1.0)
        assert abs(res.vector[i]) / abs(res.vector[0]) == pytest.approx(math.exp(-res.x[i]), rel=1e-3)

    def test_circle_levels(self):
        alpha = 7.0
        _, mu = robin_effective_boundary(circle_profile(1.0, 2000), alpha)
        np.testing.assert_allclose(mu, [-alpha, -alpha + 1, -alpha + 1], atol=1e-5)

    @given(st.floats(-3.0, 3.0))
    @settings(max_examples=10)
    def test_curvature_shift(self, c):
        prof = ellipse_profile(2.0, 1.0, n=800)
        alpha = 5.0
        _, base = robin_effective_boundary(prof, alpha)
        _, moved = robin_effective_boundary(prof.shifted(c), alpha)
        np.testing.assert_allclose(moved, base - alpha * c, atol=1e-9 * (1 + alpha * abs(c)))

    def test_ellipse_total_curvature(self):
        prof = ellipse_profile(3.0, 1.0)
        assert prof.total_curvature() == pytest.approx(2 * math.pi, rel=1e-6)
        gmax, hess = prof.hessian_at_max()
        assert gmax == pytest.approx(3.0, rel=1e-6)
        assert hess > 0

    def test_profile_validation(self):
        with pytest.raises(ValidationError):
            CurvatureProfile(np.ones(4), 1.0)
        with pytest.raises(ValidationError):
            robin_effective_boundary(circle_profile(), -1.0)

    def test_sector_quarter_plane(self):
        res = robin_sector_numeric(math.pi / 2, n_r=200, n_phi=40)
        assert res.energy == pytest.approx(-2.0, rel=0.02)

    def test_sector_matrix_symmetric(self):
        S, _ = sector_matrix(math.pi / 3, 20.0, 30, 6)
        assert abs(S - S.T).max() < 1e-12

    def test_sector_validation(self):
        with pytest.raises(ValidationError):
            robin_sector_numeric(math.pi)
        with pytest.raises(ValidationError):
            robin_sector_numeric(math.pi / 2, R=1.0)


class TestHarmonicLevels:
    def test_one_dimensional(self):
        assert harmonic_levels([2.0], 3) == pytest.approx([1.0, 3.0, 5.0])

    def test_against_brute_force(self):
        mus = [2.0, 8.0]
        w = [math.sqrt(m / 2) for m in mus]
        brute = sorted(sum(wi * (2 * n - 1) for wi, n in zip(w, ns)) for ns in itertools.product(range(1, 12), repeat=2))
        assert harmonic_levels(mus, 6) == pytest.approx([3, 5, 7, 7, 9, 9])
        assert harmonic_levels(mus, 20) == pytest.approx(brute[:20])

    @given(st.lists(st.floats(0.1, 10.0), min_size=1, max_size=3), st.integers(1, 15))
    def test_permutation_invariant(self, mus, count):
        assert harmonic_levels(mus, count) == pytest.approx(harmonic_levels(mus[::-1], count))

    def test_multiplicity(self):
        assert harmonic_levels([2.0, 2.0], 3) == pytest.approx([2.0, 4.0, 4.0])

    def test_validation(self):
        with pytest.raises(ValidationError):
            harmonic_levels([0.0], 1)
        with pytest.raises(ValidationError):
            harmonic_levels([1.0], 0)
