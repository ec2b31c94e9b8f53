"""Bootstrap confidence sets: determinism, degenerate cases, redraw policy."""

from __future__ import annotations

import math

import numpy as np
import pytest

from cefbounds import (
    CountsSample,
    InfeasibleError,
    MicroSample,
    OutcomeRange,
    StatisticSpec,
    ValidationError,
    bootstrap_bounds,
)
from cefbounds.numeric import ConstraintSet

RANGE = OutcomeRange(0.0, 10.0)
MONO = ConstraintSet(monotone=True, curvature_limit=math.inf, range=RANGE)
MU_LEFT = StatisticSpec.interval_mean(0.0, 4.0)


@pytest.fixture(scope="module")
def counts():
    return CountsSample(
        boundaries=(0.0, 4.0, 10.0),
        means=(3.0, 7.0),
        sds=(0.5, 0.5),
        counts=(200, 300),
    )


@pytest.fixture(scope="module")
def micro():
    # bin 0 gets 40 draws, bin 1 a single row: resampling will often leave
    # bin 1 empty, exercising the redraw loop without tripping the abort
    rng = np.random.default_rng(0)
    y0 = rng.uniform(2.0, 4.0, size=40)
    return MicroSample(
        boundaries=(0.0, 4.0, 10.0),
        bin_index=tuple([0] * 40 + [1]),
        y=tuple(float(v) for v in y0) + (8.0,),
    )


class TestDeterminism:
    def test_same_seed_reproduces_everything(self, counts):
        a = bootstrap_bounds(counts, MU_LEFT, MONO, RANGE, B=100, seed=11, n_grid=10)
        b = bootstrap_bounds(counts, MU_LEFT, MONO, RANGE, B=100, seed=11, n_grid=10)
        assert a == b
        assert a.replicate_lowers == b.replicate_lowers
        assert a.replicate_uppers == b.replicate_uppers

    def test_different_seed_moves_replicates(self, counts):
        a = bootstrap_bounds(counts, MU_LEFT, MONO, RANGE, B=100, seed=11, n_grid=10)
        c = bootstrap_bounds(counts, MU_LEFT, MONO, RANGE, B=100, seed=12, n_grid=10)
        assert a.replicate_lowers != c.replicate_lowers

    def test_archived_replicates_recompute_quantiles(self, counts):
        out = bootstrap_bounds(counts, MU_LEFT, MONO, RANGE, B=100, seed=11, n_grid=10)
        ok_l = np.array([v for v in out.replicate_lowers if not math.isnan(v)])
        ok_u = np.array([v for v in out.replicate_uppers if not math.isnan(v)])
        assert float(np.quantile(ok_l, out.alpha / 2, method="lower")) == out.q_lower
        assert (
            float(np.quantile(ok_u, 1 - out.alpha / 2, method="higher")) == out.q_upper
        )

    def test_metadata_round_trip(self, counts):
        out = bootstrap_bounds(counts, MU_LEFT, MONO, RANGE, B=100, seed=7, n_grid=10)
        assert out.B == 100
        assert out.seed == 7
        assert out.alpha == 0.05
        assert len(out.replicate_lowers) == 100
        assert len(out.replicate_uppers) == 100


class TestDegenerateAndContainment:
    def test_zero_sd_collapses_to_point_bounds(self):
        data = CountsSample(
            boundaries=(0.0, 4.0, 10.0),
            means=(3.0, 7.0),
            sds=(0.0, 0.0),
            counts=(200, 300),
        )
        out = bootstrap_bounds(data, MU_LEFT, MONO, RANGE, B=100, seed=4, n_grid=10)
        assert out.lower == out.point.lower
        assert out.upper == out.point.upper
        assert set(out.replicate_lowers) == {out.point.lower}
        assert set(out.replicate_uppers) == {out.point.upper}

    def test_set_contains_point_interval(self, counts):
        # window edge interior to a bin -> genuinely partially identified
        out = bootstrap_bounds(
            counts,
            StatisticSpec.interval_mean(0.0, 7.0),
            MONO,
            RANGE,
            B=100,
            seed=11,
            n_grid=10,
        )
        assert out.point.upper - out.point.lower > 1.0
        assert out.lower <= out.point.lower <= out.point.upper <= out.upper

    def test_decreasing_direction(self):
        data = CountsSample(
            boundaries=(0.0, 4.0, 10.0),
            means=(7.0, 3.0),
            sds=(0.3, 0.3),
            counts=(200, 300),
        )
        out = bootstrap_bounds(
            data,
            MU_LEFT,
            MONO,
            RANGE,
            direction="decreasing",
            B=100,
            seed=2,
            n_grid=10,
        )
        assert out.point.lower == pytest.approx(7.0, abs=1e-9)
        assert out.lower <= out.point.lower <= out.point.upper <= out.upper
        assert out.n_failed == 0


class TestRedrawPolicy:
    def test_out_of_range_means_are_redrawn(self):
        # bin-2 mean 9.5 with se = 2/sqrt(16) = 0.5: a noticeable share of
        # replicates lands above the outcome ceiling and must be redrawn
        data = CountsSample(
            boundaries=(0.0, 4.0, 10.0),
            means=(3.0, 9.5),
            sds=(0.5, 2.0),
            counts=(200, 16),
        )
        out = bootstrap_bounds(data, MU_LEFT, MONO, RANGE, B=100, seed=3, n_grid=10)
        assert out.n_redraws > 0
        assert out.n_failed == 0
        assert out.lower <= out.point.lower <= out.point.upper <= out.upper

    def test_hopeless_noise_aborts(self):
        data = CountsSample(
            boundaries=(0.0, 4.0, 10.0),
            means=(3.0, 7.0),
            sds=(1000.0, 1000.0),
            counts=(4, 4),
        )
        with pytest.raises(InfeasibleError, match="replicates infeasible"):
            bootstrap_bounds(data, MU_LEFT, MONO, RANGE, B=100, seed=5, n_grid=10)

    def test_micro_singleton_bin_redraws_without_abort(self, micro):
        out = bootstrap_bounds(micro, MU_LEFT, MONO, RANGE, B=100, seed=9, n_grid=10)
        assert out.n_redraws > 10
        assert out.n_failed == 0
        assert out.lower <= out.point.lower <= out.point.upper <= out.upper

    def test_micro_determinism(self, micro):
        a = bootstrap_bounds(micro, MU_LEFT, MONO, RANGE, B=100, seed=9, n_grid=10)
        b = bootstrap_bounds(micro, MU_LEFT, MONO, RANGE, B=100, seed=9, n_grid=10)
        assert a == b


class TestValidation:
    def test_small_B_rejected(self, counts):
        with pytest.raises(ValidationError, match="B must be"):
            bootstrap_bounds(counts, MU_LEFT, MONO, RANGE, B=99, seed=1, n_grid=10)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5])
    def test_alpha_out_of_range_rejected(self, counts, alpha):
        with pytest.raises(ValidationError, match="alpha"):
            bootstrap_bounds(
                counts, MU_LEFT, MONO, RANGE, B=100, seed=1, alpha=alpha, n_grid=10
            )

    def test_counts_sample_field_checks(self):
        with pytest.raises(ValidationError, match="count"):
            CountsSample((0.0, 4.0, 10.0), (3.0, 7.0), (0.5, 0.5), (0, 300))
        with pytest.raises(ValidationError, match="nonnegative"):
            CountsSample((0.0, 4.0, 10.0), (3.0, 7.0), (-0.5, 0.5), (200, 300))
        with pytest.raises(ValidationError, match="2 entries"):
            CountsSample((0.0, 4.0, 10.0), (3.0,), (0.5, 0.5), (200, 300))

    def test_micro_sample_field_checks(self):
        with pytest.raises(ValidationError, match="no rows"):
            MicroSample((0.0, 4.0, 10.0), (0, 0, 0), (1.0, 2.0, 3.0))
        with pytest.raises(ValidationError, match="out of range"):
            MicroSample((0.0, 4.0, 10.0), (0, 2), (1.0, 2.0))
        with pytest.raises(ValidationError, match="nonempty"):
            MicroSample((0.0, 4.0, 10.0), (), ())

    def test_micro_bin_means_match_numpy(self, micro):
        y = np.asarray(micro.y)
        idx = np.asarray(micro.bin_index)
        want = tuple(float(y[idx == k].mean()) for k in range(2))
        assert micro.bin_means() == pytest.approx(want, abs=0.0)
