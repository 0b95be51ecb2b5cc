import math

import numpy as np
import pytest

from sardamage.features import SeriesSegment
from sardamage.pwtt import (
    DEFAULT_CUTOFF,
    InsufficientDataError,
    decide,
    pwtt_score,
    pwtt_statistic,
)
from sardamage.temporal import interval

from testutil import make_stack


def welch_oracle(a, b):
    """Textbook Welch statistic, written independently: sample variances,
    absolute value."""
    na, nb = len(a), len(b)
    ma = sum(a) / na
    mb = sum(b) / nb
    va = sum((x - ma) ** 2 for x in a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1)
    return abs(mb - ma) / math.sqrt(va / na + vb / nb)


def seg(values):
    return SeriesSegment.from_values(values)


class TestStatistic:
    def test_identical_series(self):
        r = pwtt_statistic(seg([1, 1, 1, 1]), seg([1, 1, 1, 1]))
        assert r.t_abs == 0.0
        assert (r.n_pre, r.n_post) == (4, 4)

    def test_documented_example(self):
        # pre: mean 0, s²=1, n=30; post: mean 1, s²=1, n=10
        rng = np.random.default_rng(17)
        pre = rng.normal(size=30)
        pre = (pre - pre.mean()) / pre.std(ddof=1)  # exact mean 0, s²=1
        post = rng.normal(size=10)
        post = (post - post.mean()) / post.std(ddof=1) + 1.0
        r = pwtt_statistic(seg(pre), seg(post))
        expected = 1.0 / math.sqrt(1 / 30 + 1 / 10)
        assert r.t_abs == pytest.approx(expected, abs=1e-9)
        assert r.t_abs == pytest.approx(2.7386, abs=1e-3)

    def test_cutoff_flags_example_as_damaged(self):
        t = 1.0 / math.sqrt(1 / 30 + 1 / 10)
        assert decide(t, DEFAULT_CUTOFF) == 1

    def test_matches_textbook_oracle(self):
        rng = np.random.default_rng(404)
        for _ in range(1000):
            a = rng.uniform(-30, 5, size=int(rng.integers(2, 40)))
            b = rng.uniform(-30, 5, size=int(rng.integers(2, 40)))
            got = pwtt_statistic(seg(a), seg(b)).t_abs
            assert got == pytest.approx(welch_oracle(a.tolist(), b.tolist()), rel=1e-9)

    def test_symmetry(self):
        a, b = seg([1, 2, 3, 4]), seg([5, 6, 9])
        assert pwtt_statistic(a, b).t_abs == pwtt_statistic(b, a).t_abs

    def test_shift_and_scale_invariance(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=12)
        b = rng.normal(loc=0.8, size=9)
        base = pwtt_statistic(seg(a), seg(b)).t_abs
        shifted = pwtt_statistic(seg(a + 17.5), seg(b + 17.5)).t_abs
        scaled = pwtt_statistic(seg(a * 3.0), seg(b * 3.0)).t_abs
        assert shifted == pytest.approx(base, rel=1e-12)
        assert scaled == pytest.approx(base, rel=1e-12)

    def test_zero_variance_unequal_means_is_infinite(self):
        r = pwtt_statistic(seg([2, 2, 2]), seg([5, 5, 5]))
        assert math.isinf(r.t_abs)
        assert r.exceeds(1e9)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            pwtt_statistic(seg([1]), seg([1, 2]))
        with pytest.raises(InsufficientDataError):
            pwtt_statistic(seg([1, 2]), seg([3]))


def _pwtt_stack(vv_shift=2.0, vh_shift=1.0, second_orbit=False):
    """Zero-variance-free stack: orbit 43 has a known mean shift per band."""
    rng = np.random.default_rng(99)
    specs = []
    base = {"VV": -10.0, "VH": -16.0}
    for i in range(8):
        date = f"2020-0{3 + i // 2}-{10 + 10 * (i % 2):02d}"
        for pol in ("VV", "VH"):
            grid = rng.normal(base[pol], 0.5, size=(3, 3)).astype(np.float32)
            specs.append((grid, date, 43, "ASC", pol))
            if second_orbit:
                grid2 = rng.normal(base[pol], 0.5, size=(3, 3)).astype(np.float32)
                specs.append((grid2, date, 87, "DESC", pol))
    for i in range(6):
        date = f"2022-0{3 + i // 2}-{5 + 10 * (i % 2):02d}"
        for pol, shift in (("VV", vv_shift), ("VH", vh_shift)):
            grid = rng.normal(base[pol] + shift, 0.5, size=(3, 3)).astype(np.float32)
            specs.append((grid, date, 43, "ASC", pol))
            if second_orbit:
                # second orbit sees no change
                grid2 = rng.normal(base[pol], 0.5, size=(3, 3)).astype(np.float32)
                specs.append((grid2, date, 87, "DESC", pol))
    return make_stack(specs, 3, 3)


class TestScore:
    def test_single_orbit_band_mean(self):
        stack = _pwtt_stack()
        score = pwtt_score(stack, (1, 1), [43], interval(0), interval(5))
        from sardamage.features import extract_segments

        segs = extract_segments(stack, (1, 1), 43, interval(0), interval(5))
        t_vv = pwtt_statistic(segs.ref_vv, segs.new_vv).t_abs
        t_vh = pwtt_statistic(segs.ref_vh, segs.new_vh).t_abs
        assert score == pytest.approx((t_vv + t_vh) / 2, rel=1e-12)

    def test_max_over_orbits(self):
        stack = _pwtt_stack(second_orbit=True)
        both = pwtt_score(stack, (1, 1), [43, 87], interval(0), interval(5))
        only_changed = pwtt_score(stack, (1, 1), [43], interval(0), interval(5))
        only_quiet = pwtt_score(stack, (1, 1), [87], interval(0), interval(5))
        assert both == max(only_changed, only_quiet)
        assert both == only_changed  # the changed orbit dominates

    def test_no_sufficient_orbit_gives_nodata(self):
        stack = _pwtt_stack()
        # interval 9 has no layers at all
        assert pwtt_score(stack, (1, 1), [43], interval(0), interval(9)) is None

    def test_inclusive_cutoff(self):
        assert decide(1.63, 1.63) == 1
        assert decide(1.6299, 1.63) == 0
