"""Finite-horizon density statistics for sets of positive integers.

The true lower and upper densities of an integer set are limits along the
whole horizon; at desk scale we sample exact counting ratios at a list of
checkpoints and report the min and max over a tail window as *estimates* of
liminf and limsup.  Every ratio is an exact rational so that later
comparisons against rational limit values are decided without rounding.
"""

from __future__ import annotations

import csv
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence


@dataclass(frozen=True)
class IntegerSetView:
    """Immutable view of a set of positive integers.

    ``membership`` must be a pure predicate.  The optional hooks provide
    faster enumeration/counting than the O(horizon) membership scan; they
    must agree with the predicate exactly (the test suite checks this for
    the views built in this package).
    """

    membership: Callable[[int], bool]
    enumerator: Optional[Callable[[int], list[int]]] = None
    counter: Optional[Callable[[int], int]] = None
    name: str = ""

    def contains(self, n: int) -> bool:
        return n >= 1 and self.membership(n)

    def enumerate_up_to(self, horizon: int) -> list[int]:
        """Ordered members <= horizon."""
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.enumerator is not None:
            return self.enumerator(horizon)
        return [n for n in range(1, horizon + 1) if self.membership(n)]

    def count_up_to(self, horizon: int) -> int:
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.counter is not None:
            return self.counter(horizon)
        return len(self.enumerate_up_to(horizon))


def from_members(members: Iterable[int], name: str = "") -> IntegerSetView:
    """View backed by an explicit sorted member list."""
    sorted_members = sorted(set(members))
    if sorted_members and sorted_members[0] < 1:
        raise ValueError("members must be positive integers")
    member_set = frozenset(sorted_members)

    def enum(horizon: int) -> list[int]:
        return sorted_members[: bisect_right(sorted_members, horizon)]

    return IntegerSetView(
        membership=lambda n: n in member_set,
        enumerator=enum,
        counter=lambda horizon: bisect_right(sorted_members, horizon),
        name=name,
    )


EMPTY_SET = IntegerSetView(membership=lambda n: False, enumerator=lambda h: [],
                           counter=lambda h: 0, name="empty")
ALL_INTEGERS = IntegerSetView(membership=lambda n: True,
                              enumerator=lambda h: list(range(1, h + 1)),
                              counter=lambda h: h, name="all")


def count_up_to(view: IntegerSetView, horizon: int) -> int:
    """#{n in [1, horizon] : n in view}."""
    return view.count_up_to(horizon)


@dataclass(frozen=True)
class DensityReport:
    """Exact counting ratios of a set at increasing checkpoints.

    ``running_min``/``running_max`` are min/max ratios over the last
    ``tail_window`` checkpoints: finite-horizon stand-ins for liminf and
    limsup, labeled as estimates because no finite sample can certify the
    limits themselves.
    """

    checkpoints: tuple[int, ...]
    counts: tuple[int, ...]
    ratios: tuple[Fraction, ...]
    tail_window: int
    running_min: Fraction
    running_max: Fraction

    CSV_HEADER = ("checkpoint", "count", "ratio_num", "ratio_den", "ratio_float")

    def rows(self) -> list[tuple[int, int, int, int, float]]:
        return [
            (n, c, r.numerator, r.denominator, float(r))
            for n, c, r in zip(self.checkpoints, self.counts, self.ratios)
        ]

    def write_csv(self, path: Path | str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(self.CSV_HEADER)
            writer.writerows(self.rows())


def density_ratios(view: IntegerSetView, checkpoints: Sequence[int],
                   tail_window: int | None = None) -> DensityReport:
    """Exact ratios count/checkpoint at each checkpoint.

    ``checkpoints`` must be strictly increasing; ``tail_window`` defaults to
    the whole list.
    """
    if not checkpoints:
        raise ValueError("checkpoint list must be non-empty")
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if checkpoints[0] < 1:
        raise ValueError("checkpoints must be >= 1")
    counts = tuple(view.count_up_to(n) for n in checkpoints)
    ratios = tuple(Fraction(c, n) for c, n in zip(counts, checkpoints))
    window = len(ratios) if tail_window is None else max(1, min(tail_window, len(ratios)))
    tail = ratios[-window:]
    return DensityReport(
        checkpoints=tuple(checkpoints),
        counts=counts,
        ratios=ratios,
        tail_window=window,
        running_min=min(tail),
        running_max=max(tail),
    )


def upper_banach_density_estimate(view: IntegerSetView, window: int,
                                  horizon: int) -> Fraction:
    """Best window-relative count over all length-``window`` blocks in [1, horizon].

    Scans start positions a with [a, a+window) inside [1, horizon+1); the
    maximizing block can always be slid left until its left edge sits on a
    member, so only member-aligned (and the right-clamped) starts are tried.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > horizon:
        raise ValueError("window must not exceed horizon")
    members = view.enumerate_up_to(horizon)
    if not members:
        return Fraction(0)
    last_start = horizon - window + 1
    best = 0
    for m in members:
        start = min(m, last_start)
        lo = bisect_left(members, start)
        hi = bisect_right(members, start + window - 1)
        best = max(best, hi - lo)
    return Fraction(best, window)
