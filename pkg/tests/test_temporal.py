import datetime as dt

import pytest

from sardamage.temporal import (
    DISCARD,
    INVASION_DATE,
    LabelContext,
    Timeline,
    assign_label,
    interval,
    parse_date,
)


class TestIntervals:
    def test_reference_year(self):
        t0 = interval(0)
        assert t0.start == dt.date(2020, 2, 24)
        assert t0.end == dt.date(2021, 2, 23)

    def test_first_assessment_window(self):
        t1 = interval(1)
        assert t1.start == dt.date(2021, 2, 24)
        assert t1.end == dt.date(2021, 5, 23)

    def test_last_assessment_window(self):
        t12 = interval(12)
        assert t12.start == dt.date(2023, 11, 24)
        assert t12.end == dt.date(2024, 2, 23)

    def test_contiguous_and_nonoverlapping(self):
        prev = interval(0)
        for n in range(1, 13):
            cur = interval(n)
            assert cur.start == prev.end + dt.timedelta(days=1)
            prev = cur
        assert interval(12).end == dt.date(2024, 2, 23)

    def test_total_ordering_by_index(self):
        assert interval(3) < interval(4)
        assert sorted([interval(5), interval(2)])[0].index == 2

    @pytest.mark.parametrize("n", [-1, 13, 100])
    def test_out_of_range(self, n):
        with pytest.raises(IndexError):
            interval(n)

    def test_membership_is_inclusive(self):
        t1 = interval(1)
        assert t1.contains(t1.start)
        assert t1.contains(t1.end)
        assert not t1.contains(t1.end + dt.timedelta(days=1))

    def test_custom_anchor(self):
        tl = Timeline(anchor=dt.date(2019, 6, 10))
        assert tl.interval(0).end == dt.date(2020, 6, 9)
        assert tl.interval(1).start == dt.date(2020, 6, 10)
        assert tl.interval(1).end == dt.date(2020, 9, 9)


class TestAssignLabel:
    CTX = LabelContext(unosat_date=dt.date(2022, 5, 10))

    def test_pre_invasion_window(self):
        assert assign_label(dt.date(2021, 5, 23), self.CTX) == 0

    def test_post_annotation_window(self):
        assert assign_label(dt.date(2022, 8, 23), self.CTX) == 1

    def test_gap_window_discarded(self):
        ctx = LabelContext(unosat_date=dt.date(2022, 9, 1))
        assert assign_label(dt.date(2022, 5, 23), ctx) == DISCARD

    def test_boundary_on_invasion_date(self):
        assert assign_label(INVASION_DATE, self.CTX) == 0

    def test_boundary_on_annotation_date(self):
        # strict inequality on the damaged branch
        assert assign_label(self.CTX.unosat_date, self.CTX) == DISCARD

    def test_day_after_annotation(self):
        assert assign_label(self.CTX.unosat_date + dt.timedelta(days=1), self.CTX) == 1

    def test_all_2021_periods_are_negative(self):
        for n in range(1, 5):
            assert assign_label(interval(n).end, self.CTX) == 0

    def test_exhaustive_and_exclusive(self):
        ctx = LabelContext(unosat_date=dt.date(2022, 7, 1))
        d = dt.date(2020, 6, 1)
        while d < dt.date(2024, 6, 1):
            assert assign_label(d, ctx) in (0, 1, DISCARD)
            d += dt.timedelta(days=17)

    def test_context_requires_unosat_after_invasion(self):
        with pytest.raises(ValueError):
            LabelContext(unosat_date=dt.date(2021, 1, 1))
        with pytest.raises(ValueError):
            LabelContext(unosat_date=INVASION_DATE)


def test_iso_date_round_trip():
    d = parse_date("2022-02-24")
    assert d == INVASION_DATE
    assert d.isoformat() == "2022-02-24"
