"""Dyadic placement sets with a two-limit density oscillation.

The positive integers from 2 on are covered by the dyadic ranges
[2^j, 2^(j+1)).  Splitting each range into successive halves gives, for every
level s >= 1 and scale j >= s, the half-open strip

    strip(s, j) = [2^(j+1) - 2^(j-s+1), 2^(j+1) - 2^(j-s)),

of width 2^(j-s); strips with distinct (level, scale) never overlap.  The
*sites* of level s inside a strip are the multiples of the alignment modulus
2^(s+1+p) lying at least one modulus away from the strip boundary, defined
for scales j >= 2s+p+2 so that the strip is wide enough to contain some.

Two families are built from the sites:

* the site *pool* of level s: sites over all admissible scales.  Pool members
  of any two levels are separated by at least the larger alignment modulus,
  which is what makes the later vector assembly non-interfering;
* the site *set* of level s: only scales j with j mod 5 in {0, 2} are kept.
  The kept scales carry a dyadically weighted mass whose normalized partial
  sums converge to different rational limits (denominator 31) along the two
  residue classes, so the counting ratio of a site set oscillates forever
  between two distinct values along the checkpoint horizons 2^(q+1).

Everything here is exact integer/rational arithmetic; per-scale counts use
closed-form range arithmetic so horizons near 2^33 stay cheap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Optional

from .densities import IntegerSetView

SCALE_PERIOD = 5
SELECTED_RESIDUES = (0, 2)

CLASS1 = "CLASS1"  # checkpoint exponents q = 0 (mod 5)
CLASS2 = "CLASS2"  # checkpoint exponents q = 2 (mod 5)

#: Exact limits of the normalized selected-scale mass S(a, b) as b grows along
#: a fixed residue class of b mod 5 (independent of a).
_MASS_LIMITS = {
    0: Fraction(36, 31),
    1: Fraction(18, 31),
    2: Fraction(40, 31),
    3: Fraction(20, 31),
    4: Fraction(10, 31),
}

#: Valid for every 0 <= a < b: the normalized mass never exceeds this.
MASS_SUP_BOUND = Fraction(64, 31)


def scale_selected(scale: int) -> bool:
    """True when the scale survives the residue filter."""
    return scale >= 0 and scale % SCALE_PERIOD in SELECTED_RESIDUES


def scale_index(n: int) -> int:
    """The unique j with 2^j <= n < 2^(j+1); requires n >= 2."""
    if n < 2:
        raise ValueError("scale index needs n >= 2")
    return n.bit_length() - 1


def min_alignment_exponent(d: int) -> int:
    """Smallest p >= 1 with 2^(s+1+p) >= 2^(s+1) + 2d + 1 for every s >= 1.

    The gap 2^(s+1)(2^p - 1) grows with s, so s = 1 is the binding case.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    p = 1
    while 2 ** (2 + p) < 4 + 2 * d + 1:
        p += 1
    return p


@dataclass(frozen=True)
class SeparationParams:
    """Global constants of the construction.

    ``d`` is the guard radius around the functional's support and ``p`` the
    alignment exponent.  Admissible parameters satisfy
    2^(s+1+p) >= 2^(s+1) + 2d + 1 for all s >= 1 (s = 1 suffices); the
    constructor only enforces shape so that deliberately inadmissible values
    can be fed to the verifiers, which then report the failing condition.
    """

    d: int = 1
    p: int = 1

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.p < 0:
            raise ValueError("p must be >= 0")

    @classmethod
    def with_min_p(cls, d: int) -> "SeparationParams":
        return cls(d=d, p=min_alignment_exponent(d))

    def is_admissible(self) -> bool:
        return self.p >= 1 and 2 ** (2 + self.p) >= 4 + 2 * self.d + 1

    def modulus(self, level: int) -> int:
        """Alignment modulus 2^(level+1+p)."""
        return 2 ** (level + 1 + self.p)

    def min_scale(self, level: int) -> int:
        """Smallest scale wide enough to host sites: 2*level + p + 2."""
        return 2 * level + self.p + 2


DEFAULT_PARAMS = SeparationParams()


@dataclass(frozen=True)
class BlockInterval:
    """Half-open strip [lo, hi) of level ``level`` inside the dyadic range of ``scale``."""

    level: int
    scale: int
    lo: int
    hi: int

    @property
    def width(self) -> int:
        return self.hi - self.lo

    def __contains__(self, n: int) -> bool:
        return self.lo <= n < self.hi


def strip(level: int, scale: int) -> BlockInterval:
    """The level-``level`` strip of the dyadic range [2^scale, 2^(scale+1))."""
    if level < 1:
        raise ValueError("level must be >= 1")
    if scale < level:
        raise ValueError("scale must be >= level")
    lo = 2 ** (scale + 1) - 2 ** (scale - level + 1)
    hi = 2 ** (scale + 1) - 2 ** (scale - level)
    return BlockInterval(level=level, scale=scale, lo=lo, hi=hi)


def strip_sites(params: SeparationParams, level: int, scale: int) -> range:
    """Aligned sites inside strip(level, scale), sorted.

    Sites are the multiples of the alignment modulus m whose distance to the
    strip's complement is >= m.  Both strip endpoints are multiples of m for
    admissible scales, so the sites are exactly lo+m, lo+2m, ..., hi-m and
    the count equals width/m - 1, inside [width/m - 2, width/m] always.
    """
    if scale < params.min_scale(level):
        raise ValueError(
            f"scale {scale} below minimum {params.min_scale(level)} for level {level}"
        )
    block = strip(level, scale)
    m = params.modulus(level)
    first = ((block.lo + m - 1 + m - 1) // m) * m  # smallest multiple at margin >= m
    last = block.hi - m  # largest multiple with hi - site >= m
    return range(first, last + 1, m)


def in_site_pool(params: SeparationParams, level: int, n: int) -> bool:
    """Membership in the level's site pool (all admissible scales)."""
    if n < 2:
        return False
    m = params.modulus(level)
    if n % m:
        return False
    scale = n.bit_length() - 1
    if scale < params.min_scale(level):
        return False
    block = strip(level, scale)
    return n - (block.lo - 1) >= m and block.hi - n >= m


def in_site_set(params: SeparationParams, level: int, n: int) -> bool:
    """Membership in the level's site set (selected scales only)."""
    if n < 2:
        return False
    m = params.modulus(level)
    if n % m:
        return False
    scale = n.bit_length() - 1
    if not scale_selected(scale) or scale < params.min_scale(level):
        return False
    block = strip(level, scale)
    return n - (block.lo - 1) >= m and block.hi - n >= m


def _admissible_scales(params: SeparationParams, level: int, horizon: int,
                       selected_only: bool) -> Iterator[int]:
    scale = params.min_scale(level)
    while 2 ** scale <= horizon:
        if not selected_only or scale_selected(scale):
            yield scale
        scale += 1


def site_members(params: SeparationParams, level: int, horizon: int) -> list[int]:
    """Site set members <= horizon, sorted."""
    out: list[int] = []
    for scale in _admissible_scales(params, level, horizon, selected_only=True):
        sites = strip_sites(params, level, scale)
        if sites and sites[-1] <= horizon:
            out.extend(sites)
        else:
            out.extend(s for s in sites if s <= horizon)
    return out


def site_pool_members(params: SeparationParams, level: int, horizon: int) -> list[int]:
    """Site pool members <= horizon, sorted."""
    out: list[int] = []
    for scale in _admissible_scales(params, level, horizon, selected_only=False):
        out.extend(s for s in strip_sites(params, level, scale) if s <= horizon)
    return out


def count_sites(params: SeparationParams, level: int, horizon: int) -> int:
    """#(site set of ``level`` in [1, horizon]) by per-scale range arithmetic."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    m = params.modulus(level)
    total = 0
    for scale in _admissible_scales(params, level, horizon, selected_only=True):
        sites = strip_sites(params, level, scale)
        top = min(sites[-1], horizon)
        if top >= sites[0]:
            total += (top - sites[0]) // m + 1
    return total


def site_set_view(params: SeparationParams, level: int) -> IntegerSetView:
    """Density-module view of the level's site set."""
    return IntegerSetView(
        membership=lambda n: in_site_set(params, level, n),
        enumerator=lambda horizon: site_members(params, level, horizon),
        counter=lambda horizon: count_sites(params, level, horizon),
        name=f"sites(level={level},d={params.d},p={params.p})",
    )


def _largest_site_at_most(params: SeparationParams, level: int, n: int) -> Optional[int]:
    if n < 2:
        return None
    m = params.modulus(level)
    for scale in range(n.bit_length() - 1, params.min_scale(level) - 1, -1):
        if not scale_selected(scale):
            continue
        sites = strip_sites(params, level, scale)
        candidate = min(sites[-1], (n // m) * m)
        if candidate >= sites[0]:
            return candidate
    return None


def _smallest_site_at_least(params: SeparationParams, level: int, n: int) -> int:
    m = params.modulus(level)
    scale = max(params.min_scale(level), n.bit_length() - 1 if n >= 2 else 0)
    while True:
        if scale_selected(scale):
            sites = strip_sites(params, level, scale)
            candidate = max(sites[0], ((n + m - 1) // m) * m)
            if candidate <= sites[-1]:
                return candidate
        scale += 1


def nearest_site_distance(params: SeparationParams, level: int, n: int) -> int:
    """Exact distance from n to the level's site set (never empty upward)."""
    below = _largest_site_at_most(params, level, n)
    above = _smallest_site_at_least(params, level, n)
    dist = above - n
    if below is not None:
        dist = min(dist, n - below)
    return dist


# ---------------------------------------------------------------------------
# Normalized selected-scale mass
# ---------------------------------------------------------------------------

def scale_mass(a: int, b: int) -> Fraction:
    """2^(-b) * sum of 2^j over selected scales j with a < j <= b, exact."""
    if a < 0 or b <= a:
        raise ValueError("need 0 <= a < b")
    total = sum(2 ** j for j in range(a + 1, b + 1) if scale_selected(j))
    return Fraction(total, 2 ** b)


def scale_mass_limit(residue: int) -> Fraction:
    """Limit of scale_mass(a, b) for b -> infinity along b = residue (mod 5)."""
    if residue not in _MASS_LIMITS:
        raise ValueError("residue must be in 0..4")
    return _MASS_LIMITS[residue]


def mass_table_rows(a_lo: int, a_hi: int, b_max: int) -> list[tuple]:
    """CSV rows (a, b, b_mod_5, S_num, S_den, limit_num, limit_den, abs_err_float)."""
    if a_lo < 0 or a_hi < a_lo or b_max <= a_hi:
        raise ValueError("need 0 <= a_lo <= a_hi < b_max")
    rows = []
    for a in range(a_lo, a_hi + 1):
        for b in range(a + 1, b_max + 1):
            s = scale_mass(a, b)
            limit = scale_mass_limit(b % SCALE_PERIOD)
            rows.append((a, b, b % SCALE_PERIOD, s.numerator, s.denominator,
                         limit.numerator, limit.denominator, float(abs(s - limit))))
    return rows


MASS_TABLE_HEADER = ("a", "b", "b_mod_5", "S_num", "S_den",
                     "limit_num", "limit_den", "abs_err_float")


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Checkpoints:
    """Horizon subsequence 2^(q+1) over selected exponents q >= p+4.

    The exponents q run through the selected scales; since selected scales
    are never adjacent, q+1 is itself never selected, which keeps every
    horizon clear of the strips that start at selected scales.
    """

    exponents: tuple[int, ...]
    horizons: tuple[int, ...]
    classes: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.exponents)

    def rows(self) -> list[tuple[int, int, int, str]]:
        return [(l + 1, q, n, c) for l, (q, n, c) in
                enumerate(zip(self.exponents, self.horizons, self.classes))]


def _class_label(q: int) -> str:
    return CLASS1 if q % SCALE_PERIOD == 0 else CLASS2


def checkpoint_schedule(params: SeparationParams, count: int) -> Checkpoints:
    """First ``count`` checkpoints for the given parameters."""
    if count < 1:
        raise ValueError("count must be >= 1")
    exponents = []
    q = params.p + 4
    while len(exponents) < count:
        if scale_selected(q):
            exponents.append(q)
        q += 1
    return Checkpoints(
        exponents=tuple(exponents),
        horizons=tuple(2 ** (q + 1) for q in exponents),
        classes=tuple(_class_label(q) for q in exponents),
    )


def checkpoints_between(params: SeparationParams, q_lo: int, q_hi: int) -> Checkpoints:
    """Checkpoints with exponent in [q_lo, q_hi]."""
    exponents = tuple(q for q in range(max(q_lo, params.p + 4), q_hi + 1)
                      if scale_selected(q))
    if not exponents:
        raise ValueError("no checkpoint exponents in range")
    return Checkpoints(
        exponents=exponents,
        horizons=tuple(2 ** (q + 1) for q in exponents),
        classes=tuple(_class_label(q) for q in exponents),
    )


def is_checkpoint_horizon(params: SeparationParams, horizon: int) -> bool:
    if horizon < 2 or horizon & (horizon - 1):
        return False
    q = horizon.bit_length() - 2
    return q >= params.p + 4 and scale_selected(q)


# ---------------------------------------------------------------------------
# Verification reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckReport:
    """Outcome of one verification run; a failure is data, not an exception."""

    check: str
    params: dict
    range_: dict
    passed: bool
    first_violation: Optional[dict]

    def to_json_dict(self) -> dict:
        return {
            "check": self.check,
            "params": self.params,
            "range": self.range_,
            "pass": self.passed,
            "first_violation": self.first_violation,
        }

    def write_json(self, path: Path | str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_json_dict(), handle, indent=2, sort_keys=True)


def _params_dict(params: SeparationParams) -> dict:
    return {"d": params.d, "p": params.p}


def verify_separation(params: SeparationParams, max_level: int,
                      horizon: int) -> CheckReport:
    """Exhaustive floor/spacing checks on all site-set members <= horizon.

    Checks, in order: every level's minimum clears 2^(level+1) (site pools
    clear the stronger floor 2^(2*level+p+2)); members of one level are at
    least 2^(level+1)+2d+1 apart; members of distinct levels are at least
    2^(max(level,level')+1)+2d+1 apart.  Stops at the first violation.
    """
    if max_level < 1 or horizon < 1:
        raise ValueError("max_level and horizon must be >= 1")
    range_ = {"max_level": max_level, "horizon": horizon}
    members = {level: site_members(params, level, horizon)
               for level in range(1, max_level + 1)}

    def report(violation: Optional[dict]) -> CheckReport:
        return CheckReport("separation", _params_dict(params), range_,
                           violation is None, violation)

    for level, mem in members.items():
        floor = 2 ** (level + 1)
        if mem and mem[0] < floor:
            return report({"condition": "min_floor", "level": level,
                           "member": mem[0], "required": floor})
        pool = site_pool_members(params, level, horizon)
        pool_floor = 2 ** (2 * level + params.p + 2)
        if pool and pool[0] < pool_floor:
            return report({"condition": "pool_min_floor", "level": level,
                           "member": pool[0], "required": pool_floor})

    for level, mem in members.items():
        need = 2 ** (level + 1) + 2 * params.d + 1
        for a, b in zip(mem, mem[1:]):
            if b - a < need:
                return report({"condition": "same_level_gap", "level": level,
                               "i": a, "i_prime": b, "gap": b - a,
                               "required": need})

    for level in range(1, max_level + 1):
        for other in range(level + 1, max_level + 1):
            need = 2 ** (other + 1) + 2 * params.d + 1
            merged = sorted(
                [(n, level) for n in members[level]] +
                [(n, other) for n in members[other]]
            )
            for (n1, l1), (n2, l2) in zip(merged, merged[1:]):
                if l1 != l2 and n2 - n1 < need:
                    return report({"condition": "cross_level_gap",
                                   "levels": [l1, l2], "i": n1, "i_prime": n2,
                                   "gap": n2 - n1, "required": need})
    return report(None)


def verify_checkpoint_gap(params: SeparationParams, max_level: int,
                          count: int) -> CheckReport:
    """Exact distance from every checkpoint to every site set vs 2^level + d."""
    if max_level < 1 or count < 1:
        raise ValueError("max_level and count must be >= 1")
    schedule = checkpoint_schedule(params, count)
    range_ = {"max_level": max_level, "checkpoints": count}
    for level in range(1, max_level + 1):
        need = 2 ** level + params.d
        for q, horizon in zip(schedule.exponents, schedule.horizons):
            dist = nearest_site_distance(params, level, horizon)
            if dist < need:
                violation = {"condition": "checkpoint_gap", "level": level,
                             "q": q, "horizon": horizon, "distance": dist,
                             "required": need}
                return CheckReport("checkpoint_gap", _params_dict(params),
                                   range_, False, violation)
    return CheckReport("checkpoint_gap", _params_dict(params), range_, True, None)
