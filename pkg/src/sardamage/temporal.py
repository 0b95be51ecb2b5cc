"""Acquisition windows and dynamic label assignment.

The analysis timeline is anchored on a fixed one-year reference window
followed by consecutive 3-month assessment windows. All dates are
timezone-free calendar dates; interval endpoints are inclusive.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

#: Start of the full-scale invasion; the boundary between "known intact"
#: and "possibly damaged" assessment periods.
INVASION_DATE = dt.date(2022, 2, 24)

#: Anchor of the default timeline: start of the one-year reference window.
REFERENCE_START = dt.date(2020, 2, 24)

#: Number of 3-month assessment windows after the reference window.
N_ASSESSMENT_PERIODS = 12

DISCARD = -1


def _add_months(d: dt.date, months: int) -> dt.date:
    m = d.month - 1 + months
    year = d.year + m // 12
    month = m % 12 + 1
    return dt.date(year, month, d.day)


@dataclass(frozen=True, order=True)
class TimeInterval:
    """Closed calendar interval [start, end], ordered by index."""

    index: int
    start: dt.date = field(compare=False)
    end: dt.date = field(compare=False)

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"interval {self.index}: start {self.start} after end {self.end}")

    def contains(self, d: dt.date) -> bool:
        return self.start <= d <= self.end

    @property
    def t_max(self) -> dt.date:
        """End date of the interval; drives label assignment."""
        return self.end


@dataclass(frozen=True)
class Timeline:
    """Interval anchors. The defaults encode the Ukraine analysis timeline;
    override ``anchor`` to reuse the machinery for another region."""

    anchor: dt.date = REFERENCE_START
    n_periods: int = N_ASSESSMENT_PERIODS

    def interval(self, n: int) -> TimeInterval:
        """Canonical interval ``n``.

        Interval 0 is the one-year reference window; intervals 1..n_periods
        are consecutive 3-month windows, each starting the day after the
        previous one ends.
        """
        if not 0 <= n <= self.n_periods:
            raise IndexError(f"interval index {n} out of range 0..{self.n_periods}")
        if n == 0:
            start = self.anchor
            end = _add_months(self.anchor, 12) - dt.timedelta(days=1)
        else:
            start = _add_months(self.anchor, 12 + 3 * (n - 1))
            end = _add_months(self.anchor, 12 + 3 * n) - dt.timedelta(days=1)
        return TimeInterval(index=n, start=start, end=end)

    def intervals(self) -> list[TimeInterval]:
        return [self.interval(n) for n in range(self.n_periods + 1)]


DEFAULT_TIMELINE = Timeline()


def interval(n: int) -> TimeInterval:
    """Canonical interval ``n`` of the default timeline."""
    return DEFAULT_TIMELINE.interval(n)


@dataclass(frozen=True)
class LabelContext:
    """Dates bounding the damage event for one annotated point.

    ``unosat_date`` is the acquisition date of the post-event image used by
    the annotator; damage happened somewhere between the invasion and that
    date. Must satisfy ``unosat_date > invasion_date``.
    """

    unosat_date: dt.date
    invasion_date: dt.date = INVASION_DATE

    def __post_init__(self) -> None:
        if self.unosat_date <= self.invasion_date:
            raise ValueError(
                f"post-event annotation date {self.unosat_date} does not follow "
                f"the invasion date {self.invasion_date}"
            )


def assign_label(t_max: dt.date, ctx: LabelContext) -> int:
    """Dynamic label for an assessment window ending at ``t_max``.

    Returns 0 (intact) when the window closes before the invasion,
    1 (damaged) when it closes strictly after the post-event annotation
    date, and DISCARD (-1) in between, where the sample is unusable because
    the event date within the gap is unknown. Total on valid contexts.
    """
    if t_max <= ctx.invasion_date:
        return 0
    if t_max > ctx.unosat_date:
        return 1
    return DISCARD


def parse_date(s: str) -> dt.date:
    """Parse an ISO-8601 ``YYYY-MM-DD`` calendar date."""
    return dt.date.fromisoformat(s)
