import numpy as np
import pytest

from cefbounds import (
    BinnedSample,
    ClampWarning,
    DistributionSpec,
    OutcomeRange,
    StepCEF,
    ValidationError,
    cef_bounds_analytic,
    cef_envelope_analytic,
    crossover,
    crossover_table,
    flip_sample,
    manski_tamer,
    mu_bounds,
    sharpness_witness,
    uniform_dist,
)
from cefbounds.analytic import _clamped
from oracles import merge_adjacent_bins, step_bin_means

RANGE = OutcomeRange(0.0, 10.0)
UNIF = uniform_dist(0.0, 10.0)


def two_bin():
    return BinnedSample(boundaries=(0.0, 6.0, 10.0), means=(2.0, 8.0),
                        direction="increasing", range=RANGE)


def three_bin():
    return BinnedSample(boundaries=(0.0, 4.0, 7.0, 10.0), means=(1.0, 5.0, 9.0),
                        direction="increasing", range=RANGE)


def lumpy_dist():
    return DistributionSpec(
        kind="gridded", support=(0.0, 10.0),
        cdf_grid=((0.0, 0.0), (2.0, 0.1), (5.0, 0.55), (8.0, 0.8), (10.0, 1.0)),
    )


class TestManskiTamer:
    def test_interior_bins_use_neighbor_means(self):
        s = three_bin()
        assert manski_tamer(s, 5.0) == (1.0, 9.0)
        # edge bins fall back to the outcome range
        assert manski_tamer(s, 1.0) == (0.0, 5.0)
        assert manski_tamer(s, 9.0) == (5.0, 10.0)

    def test_single_bin_gives_full_range(self):
        s = BinnedSample(boundaries=(0.0, 10.0), means=(4.0,),
                         direction="increasing", range=RANGE)
        assert manski_tamer(s, 5.0) == (0.0, 10.0)


class TestSharpBounds:
    def test_two_bin_closed_form_values(self):
        s = two_bin()
        lo, hi = cef_bounds_analytic(s, UNIF, 3.0)
        assert hi == pytest.approx(4.0, abs=1e-9)
        assert lo == pytest.approx(0.0, abs=1e-9)
        lo, hi = cef_bounds_analytic(s, UNIF, 5.0)
        assert lo == pytest.approx(0.8, abs=1e-9)
        assert hi == pytest.approx(8.0, abs=1e-9)

    def test_crossover_closed_form(self):
        assert crossover(two_bin(), UNIF, 1) == pytest.approx(4.5, abs=1e-9)

    def test_envelope_continuous_at_crossover(self):
        s = two_bin()
        eps = 1e-7
        below = cef_bounds_analytic(s, UNIF, 4.5 - eps)
        at = cef_bounds_analytic(s, UNIF, 4.5)
        assert below[0] == pytest.approx(at[0], abs=1e-5)
        assert below[1] == pytest.approx(at[1], abs=1e-5)
        assert at == (pytest.approx(0.0), pytest.approx(8.0))

    def test_gridded_crossover_satisfies_mass_balance(self):
        s = three_bin()
        d = lumpy_dist()
        tab = crossover_table(s, d)
        for k in (1, 2, 3):
            x_star = tab.for_bin(k)
            b_lo, b_hi = s.boundaries[k - 1], s.boundaries[k]
            below = d.mass(b_lo, x_star)
            frac = below / d.mass(b_lo, b_hi)
            r = s.padded_means()
            target = (r[k + 1] - r[k]) / (r[k + 1] - r[k - 1])
            assert frac == pytest.approx(target, abs=1e-9)

    def test_uniform_closed_form_matches_gridded_bisection(self):
        s = three_bin()
        # a gridded spec that IS the uniform cdf: both formulas must agree
        grid = tuple((x, x / 10.0) for x in np.linspace(0.0, 10.0, 21))
        d = DistributionSpec(kind="gridded", support=(0.0, 10.0), cdf_grid=grid)
        xs = np.linspace(0.0, 10.0, 1000)
        for x in xs:
            lo_u, hi_u = cef_bounds_analytic(s, UNIF, float(x))
            lo_g, hi_g = cef_bounds_analytic(s, d, float(x))
            assert abs(lo_u - lo_g) < 1e-9
            assert abs(hi_u - hi_g) < 1e-9

    def test_refinement_of_manski_tamer(self):
        s = three_bin()
        for d in (UNIF, lumpy_dist()):
            for x in np.linspace(0.0, 10.0, 101):
                mt_lo, mt_hi = manski_tamer(s, float(x))
                lo, hi = cef_bounds_analytic(s, d, float(x))
                assert mt_lo - 1e-12 <= lo <= hi <= mt_hi + 1e-12

    def test_lower_weakly_increasing_within_bins(self):
        s = three_bin()
        env = cef_envelope_analytic(s, lumpy_dist(), np.linspace(0, 10, 400))
        lows = np.asarray(env.lower)
        bins = [s.bin_of(x) for x in env.grid]
        for k in range(s.n_bins):
            vals = lows[np.asarray(bins) == k]
            assert np.all(np.diff(vals) >= -1e-9)

    def test_tie_collapses_bin_to_constant(self):
        s = BinnedSample(boundaries=(0.0, 5.0, 10.0), means=(0.0, 10.0),
                         direction="increasing", range=RANGE)
        # neighbor padding ties the brackets (0 = y_min = r_1, r_2 = y_max):
        # each bin pins to its own mean and the crossover degenerates to
        # the bin edge
        assert cef_bounds_analytic(s, UNIF, 2.0) == (0.0, 0.0)
        assert cef_bounds_analytic(s, UNIF, 7.0) == (10.0, 10.0)
        assert crossover(s, UNIF, 1) == pytest.approx(5.0, abs=1e-9)

    def test_decreasing_sample_mirrors_increasing(self):
        inc = three_bin()
        dec = flip_sample(inc)
        for x in (1.0, 4.4, 5.0, 9.3):
            lo_i, hi_i = cef_bounds_analytic(inc, UNIF, x)
            lo_d, hi_d = cef_bounds_analytic(dec, UNIF, x)
            assert lo_d == pytest.approx(-hi_i, abs=1e-12)
            assert hi_d == pytest.approx(-lo_i, abs=1e-12)

    def test_direction_none_is_rejected_with_pointer(self):
        s = BinnedSample(boundaries=(0.0, 6.0, 10.0), means=(2.0, 8.0),
                         direction="none", range=RANGE)
        with pytest.raises(ValidationError, match="numeric engine"):
            cef_bounds_analytic(s, UNIF, 3.0)

    def test_clamp_warns_and_clips(self):
        with pytest.warns(ClampWarning):
            assert _clamped(-1.0, 11.0, RANGE) == (0.0, 10.0)


class TestWitnesses:
    @pytest.mark.parametrize("dist", [UNIF, lumpy_dist()], ids=["uniform", "gridded"])
    @pytest.mark.parametrize("x", [0.0, 1.0, 4.0, 4.4, 5.5, 7.0, 9.99, 10.0])
    @pytest.mark.parametrize("side", ["lower", "upper"])
    def test_witness_attains_bound_and_matches_bin_means(self, dist, x, side):
        s = three_bin()
        lo, hi = cef_bounds_analytic(s, dist, x)
        target = lo if side == "lower" else hi
        w = sharpness_witness(s, dist, x, side)
        assert float(w(x)) == pytest.approx(target, abs=1e-9)
        np.testing.assert_allclose(w.bin_means(dist, s.boundaries), s.means, atol=1e-9)
        # witness respects monotonicity and the outcome range
        assert np.all(np.diff(w.values) >= -1e-12)
        assert min(w.values) >= -1e-12 and max(w.values) <= 10 + 1e-12

    def test_witness_independent_integration_agrees(self):
        s = three_bin()
        d = lumpy_dist()
        w = sharpness_witness(s, d, 5.5, "upper")
        oracle = step_bin_means(w.breaks[0], w.breaks[1:], w.values, s.boundaries, d)
        np.testing.assert_allclose(oracle, s.means, atol=1e-9)

    def test_step_cef_point_override(self):
        w = StepCEF(breaks=(0.0, 6.0, 10.0), values=(1.0, 9.0),
                    point_x=3.0, point_value=4.0)
        assert float(w(3.0)) == 4.0
        assert float(w(2.999)) == 1.0
        np.testing.assert_allclose(w([2.0, 3.0, 8.0]), [1.0, 4.0, 9.0])


class TestMuBounds:
    def test_point_identified_on_boundaries_bitwise(self):
        s = three_bin()
        for d in (UNIF, lumpy_dist()):
            mu = mu_bounds(s, d, 0.0, 7.0 + 1e-11)
            w = [d.mass(0, 4), d.mass(4, 7)]
            expected = (w[0] * 1.0 + w[1] * 5.0) / sum(w)
            assert mu.point_identified
            assert mu.lower == mu.upper == expected

    def test_full_support_is_grand_mean(self):
        s = three_bin()
        mu = mu_bounds(s, UNIF, 0.0, 10.0)
        assert mu.lower == mu.upper == pytest.approx(0.4 * 1 + 0.3 * 5 + 0.3 * 9)

    def test_two_bin_frozen_interval(self):
        mu = mu_bounds(two_bin(), UNIF, 0.0, 7.0)
        assert mu.lower == pytest.approx(2.0, abs=1e-9)
        assert mu.upper == pytest.approx(20.0 / 7.0, abs=1e-9)
        assert not mu.point_identified

    def test_tighter_than_averaged_envelope(self):
        s = two_bin()
        xs = np.linspace(0.0005, 6.9995, 7000)
        los, his = zip(*(cef_bounds_analytic(s, UNIF, float(x)) for x in xs))
        mu = mu_bounds(s, UNIF, 0.0, 7.0)
        assert mu.lower >= np.mean(los) - 1e-3
        assert mu.upper <= np.mean(his) + 1e-3

    def test_rejects_degenerate_interval(self):
        with pytest.raises(ValidationError):
            mu_bounds(two_bin(), UNIF, 7.0, 7.0)
        with pytest.raises(ValidationError):
            mu_bounds(two_bin(), UNIF, -1.0, 7.0)


class TestCoarsening:
    def test_merging_bins_widens_envelope_and_mu(self):
        s = three_bin()
        merged = merge_adjacent_bins(s, UNIF, 1)
        xs = np.linspace(0.0, 10.0, 101)
        for x in xs:
            lo_f, hi_f = cef_bounds_analytic(s, UNIF, float(x))
            lo_m, hi_m = cef_bounds_analytic(merged, UNIF, float(x))
            assert lo_m <= lo_f + 1e-9
            assert hi_m >= hi_f - 1e-9
        mu_f = mu_bounds(s, UNIF, 2.0, 9.0)
        mu_m = mu_bounds(merged, UNIF, 2.0, 9.0)
        assert mu_m.lower <= mu_f.lower + 1e-9
        assert mu_m.upper >= mu_f.upper - 1e-9


def test_single_bin_sample_is_still_bounded():
    s = BinnedSample(boundaries=(0.0, 10.0), means=(4.0,),
                     direction="increasing", range=RANGE)
    lo, hi = cef_bounds_analytic(s, UNIF, 5.0)
    assert 0.0 <= lo <= 4.0 <= hi <= 10.0
    mt = manski_tamer(s, 5.0)
    assert mt[0] <= lo and hi <= mt[1]
