"""Assembly of the orbit vector and its half-space return set.

A *family* assigns to each level s a coefficient block: exact complex
rational coefficients a_j for offsets |j| <= 2^s, bounded by the level
budget c(s) = s.  The assembled vector places a copy of each level's block
vector at every site k of that level's site set; site separation keeps the
placed windows [k - 2^s, k + 2^s] disjoint, so the vector has a well-defined
coefficient b(i) = a_{k-i} at every covered index and 0 elsewhere.

For the weighted backward shift the coordinate-0 functional applied to the
n-step orbit point equals b(n) exactly, so the return set into the open
half-space {Re > 0} is {n >= 1 : Re b(n) > 0}.  Its counting ratio at the
checkpoint horizons splits exactly into per-level site counts weighted by
the per-block hit counts, which is what drives the two-limit oscillation
measured by ``density_experiment``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Mapping

from .densities import IntegerSetView
from .dyadic import (
    SeparationParams,
    Checkpoints,
    CLASS1,
    CLASS2,
    count_sites,
    in_site_set,
    is_checkpoint_horizon,
    scale_mass_limit,
    site_members,
    verify_separation,
)
from .scalars import GaussianRational, ZERO, ONE
from .shift import (
    LazyVector,
    ShiftOperator,
    apply_power,
    functional_eval,
    tail_constant,
    vector_norm,
)

_BUDGET_STABILIZATION_TOL = 1e-12


@dataclass(frozen=True)
class LevelBudgets:
    """Per-level coefficient budgets c(s) = s with their convergence certificates.

    The budgets must grow without bound, must shrink against the tail
    constants in the sense that eps(s) * sum_{s'<s} c(s') -> 0, and the
    weighted series sum c(s) * eps(s) must converge.  With the shift's
    doubly exponential eps decay all three hold; ``build_level_budgets``
    evaluates the finite-horizon certificates and refuses budgets whose
    weighted partial sums have not stabilized by ``max_level``.
    """

    max_level: int
    shrink_values: tuple[float, ...]      # eps(s) * sum_{s' < s} c(s'), s = 1..max_level
    weighted_partials: tuple[float, ...]  # partial sums of c(s) * eps(s)

    def budget(self, level: int) -> Fraction:
        if level < 1:
            raise ValueError("level must be >= 1")
        return Fraction(level)

    @property
    def growth_unbounded(self) -> bool:
        return True  # c(s) = s by construction


def build_level_budgets(op: ShiftOperator, max_level: int) -> LevelBudgets:
    """Budgets c(s) = s with certificates evaluated against the operator."""
    if max_level < 1:
        raise ValueError("max_level must be >= 1")
    eps = [tail_constant(op, s) for s in range(1, max_level + 2)]
    for s in range(len(eps) - 1):
        if eps[s + 1] > 2.0 * eps[s] ** 2:
            raise ValueError("tail constants do not decay doubly exponentially")
    shrink = tuple(eps[s - 1] * (s - 1) * s / 2.0 for s in range(1, max_level + 1))
    partials = []
    total = 0.0
    for s in range(1, max_level + 1):
        total += s * eps[s - 1]
        partials.append(total)
    last_term = max_level * eps[max_level - 1]
    if last_term > _BUDGET_STABILIZATION_TOL * max(1.0, total):
        raise ValueError(
            f"weighted budget series not stabilized by level {max_level}"
        )
    return LevelBudgets(max_level=max_level, shrink_values=shrink,
                        weighted_partials=tuple(partials))


@dataclass(frozen=True)
class CoefficientBlock:
    """One level's exact coefficients a_j, |j| <= 2^level, bounded by ``bound``."""

    level: int
    coeffs: Mapping[int, GaussianRational]
    bound: Fraction

    def __post_init__(self) -> None:
        radius = 2 ** self.level
        table = {j: a for j, a in dict(self.coeffs).items() if a}
        for j, a in table.items():
            if abs(j) > radius:
                raise ValueError(f"offset {j} outside radius {radius}")
            if a.abs_sq() > self.bound * self.bound:
                raise ValueError(f"coefficient at offset {j} exceeds bound {self.bound}")
        object.__setattr__(self, "coeffs", table)

    def a(self, offset: int) -> GaussianRational:
        return self.coeffs.get(offset, ZERO)

    @property
    def radius(self) -> int:
        return 2 ** self.level

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def positive_count(self) -> int:
        """Offsets whose coefficient has strictly positive real part."""
        return sum(1 for a in self.coeffs.values() if a.re > 0)

    def positive_offsets(self) -> list[int]:
        return sorted(j for j, a in self.coeffs.items() if a.re > 0)

    def max_abs(self) -> float:
        if not self.coeffs:
            return 0.0
        return max(math.sqrt(float(a.abs_sq())) for a in self.coeffs.values())

    def vector(self, op: ShiftOperator) -> LazyVector:
        """Block vector: coordinate m is a(-m) * w^(-m) for 0 <= m <= radius.

        Chain steps at positive offsets vanish for the shift, so only
        offsets j <= 0 show up in coordinates.
        """
        if self.is_zero:
            return LazyVector.zero()
        w = op.weight
        table = {-j: a * (w ** j) for j, a in self.coeffs.items() if j <= 0}
        return LazyVector.from_coeffs(table)


def zero_block(level: int, bound: Fraction) -> CoefficientBlock:
    return CoefficientBlock(level=level, coeffs={}, bound=bound)


def one_block_family(budgets: LevelBudgets) -> dict[int, CoefficientBlock]:
    """Minimal hand-checkable family: level 1 holds the bare chain origin."""
    blocks = {1: CoefficientBlock(level=1, coeffs={0: ONE}, bound=budgets.budget(1))}
    for level in range(2, budgets.max_level + 1):
        blocks[level] = zero_block(level, budgets.budget(level))
    return blocks


def _gaussian_integers(max_part: int) -> list[tuple[int, int]]:
    """Pairs (u, v), |u|,|v| <= max_part, positive-real-first deterministic order."""
    pairs = [(u, v) for u in range(-max_part, max_part + 1)
             for v in range(-max_part, max_part + 1)]
    pairs.sort(key=lambda uv: (uv[0] * uv[0] + uv[1] * uv[1], -uv[0], -uv[1]))
    return pairs


def enumerate_dense_vectors() -> Iterator[dict[int, GaussianRational]]:
    """Deterministic diagonal enumeration of finitely supported coefficient maps.

    Stage b = R + k + M runs over support radius R, denominator exponent k
    and numerator cap M >= 1; within a stage, coefficient tuples are walked
    in a fixed positive-real-first order.  Canonical-form filters (cap
    attained, some odd numerator when k > 0, nonzero endpoint when R > 0)
    make every map appear exactly once, so the stream is reproducible and
    eventually reaches every finitely supported vector with complex dyadic
    rational coefficients.
    """
    for stage in itertools.count(1):
        for radius in range(stage):
            for den_exp in range(stage - radius):
                cap = stage - radius - den_exp
                den = 2 ** den_exp
                candidates = _gaussian_integers(cap)
                offsets = list(range(-radius, radius + 1))
                for tup in itertools.product(candidates, repeat=len(offsets)):
                    if all(u == 0 and v == 0 for u, v in tup):
                        continue
                    if max(max(abs(u), abs(v)) for u, v in tup) != cap:
                        continue
                    if den_exp > 0 and not any(u % 2 or v % 2 for u, v in tup):
                        continue
                    if radius > 0 and tup[0] == (0, 0) and tup[-1] == (0, 0):
                        continue
                    yield {
                        j: GaussianRational(Fraction(u, den), Fraction(v, den))
                        for j, (u, v) in zip(offsets, tup)
                        if u or v
                    }


def dense_family_blocks(budgets: LevelBudgets) -> dict[int, CoefficientBlock]:
    """Slot the enumerated vectors into strictly increasing admissible levels.

    A vector with support radius R and max modulus M goes to the next free
    level s with 2^s >= R and budget(s) >= M; unclaimed levels get the zero
    block.  The first enumerated vector is the bare chain origin, so level 1
    always carries a positive-real coefficient.
    """
    blocks: dict[int, CoefficientBlock] = {}
    previous = 0
    for coeffs in enumerate_dense_vectors():
        radius = max((abs(j) for j in coeffs), default=0)
        max_sq = max(a.abs_sq() for a in coeffs.values())
        level = previous + 1
        while 2 ** level < radius or budgets.budget(level) ** 2 < max_sq:
            level += 1
        if level > budgets.max_level:
            break
        blocks[level] = CoefficientBlock(level=level, coeffs=coeffs,
                                         bound=budgets.budget(level))
        previous = level
    for level in range(1, budgets.max_level + 1):
        blocks.setdefault(level, zero_block(level, budgets.budget(level)))
    if not any(blocks[level].positive_count() for level in range(1, 4)):
        raise RuntimeError("enumeration produced no positive-real block at levels 1..3")
    return blocks


class AssembledVector:
    """The placed-block coefficient vector; immutable after construction.

    Construction enforces the closed-form spacing inequalities that keep the
    placed windows of all level pairs disjoint with clearance at least
    2d + 1; an optional ``check_horizon`` additionally runs the exhaustive
    member-level verification up to that horizon.
    """

    def __init__(self, params: SeparationParams, op: ShiftOperator,
                 budgets: LevelBudgets, blocks: Mapping[int, CoefficientBlock],
                 check_horizon: int | None = None) -> None:
        if not params.is_admissible():
            raise ValueError("separation parameters are not admissible")
        self.params = params
        self.op = op
        self.budgets = budgets
        self.max_level = budgets.max_level
        table: dict[int, CoefficientBlock] = {}
        for level, block in blocks.items():
            if not 1 <= level <= self.max_level:
                raise ValueError(f"block level {level} outside 1..{self.max_level}")
            if block.level != level:
                raise ValueError("block level mismatch")
            if block.bound > budgets.budget(level):
                raise ValueError(f"block bound at level {level} exceeds budget")
            table[level] = block
        for level in range(1, self.max_level + 1):
            table.setdefault(level, zero_block(level, budgets.budget(level)))
        self.blocks = dict(sorted(table.items()))

        clearance = 2 * params.d + 1
        for s in range(1, self.max_level + 1):
            if params.modulus(s) - 2 ** (s + 1) < clearance:
                raise ValueError(f"same-level windows too close at level {s}")
            for t in range(s + 1, self.max_level + 1):
                if params.modulus(t) - 2 ** s - 2 ** t < clearance:
                    raise ValueError(f"cross-level windows too close for {s},{t}")

        if check_horizon is not None:
            report = verify_separation(params, self.max_level, check_horizon)
            if not report.passed:
                raise ValueError(f"separation check failed: {report.first_violation}")

        # hot-path data for coefficient lookups: (level, modulus, radius, coeffs)
        self._lookup = tuple(
            (level, params.modulus(level), 2 ** level, block.coeffs)
            for level, block in self.blocks.items()
            if not block.is_zero
        )

    @property
    def active_levels(self) -> list[int]:
        return [level for level, block in self.blocks.items() if not block.is_zero]

    def coefficient_cap(self) -> float:
        """Largest coefficient modulus over all blocks (0.0 if all zero)."""
        return max((block.max_abs() for block in self.blocks.values()), default=0.0)

    def hit_counts(self) -> dict[int, int]:
        """Per-level count of offsets with positive real part."""
        return {level: block.positive_count() for level, block in self.blocks.items()}


def expansion_coefficient(av: AssembledVector, index: int) -> GaussianRational:
    """b(index): the coefficient the assembly places at ``index`` (0 if uncovered).

    A placed window of level s around site k has width 2^(s+1)+1, strictly
    less than the level's alignment modulus, so at most one aligned
    candidate per level can cover the index; membership of that candidate in
    the site set settles it.
    """
    if index < 2:
        return ZERO
    params = av.params
    for level, modulus, radius, coeffs in av._lookup:
        k = index + radius
        k -= k % modulus
        if k >= index - radius and in_site_set(params, level, k):
            hit = coeffs.get(k - index)
            if hit is not None:
                return hit
    return ZERO


def orbit_functional(av: AssembledVector, n: int) -> GaussianRational:
    """Half-space functional of the n-step orbit point, exact.

    For the shift the n-th orbit coordinate 0 equals w^n * b(n) * w^(-n),
    so the value is b(n) itself.
    """
    if n < 1:
        raise ValueError("orbit step must be >= 1")
    return expansion_coefficient(av, n)


class SeriesOracle:
    """Independent summation route to the orbit functional.

    Materializes every level's site list once, then evaluates the n-step
    functional by summing the placed-block series at coordinate n and
    rescaling by the n-th weight power.  The rescale is done in exact
    rational arithmetic (w^n overflows floats long before the horizon) and
    only the final value is converted to a complex float.
    """

    def __init__(self, av: AssembledVector, horizon: int) -> None:
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.av = av
        self.horizon = horizon
        self._members = {
            level: site_members(av.params, level, horizon + 2 ** level)
            for level in av.active_levels
        }

    def value(self, n: int) -> complex:
        if not 1 <= n <= self.horizon:
            raise ValueError(f"orbit step {n} outside oracle horizon {self.horizon}")
        av = self.av
        total = ZERO
        for level, members in self._members.items():
            block = av.blocks[level]
            radius = block.radius
            lo = bisect_left(members, n - radius)
            hi = bisect_right(members, n + radius)
            for k in members[lo:hi]:
                total = total + block.a(k - n)
        if not total:
            return 0j
        coordinate = total * (av.op.weight ** -n)  # exact coordinate n of the vector
        return complex(coordinate * (av.op.weight ** n))


def site_hit_count(av: AssembledVector, level: int, verify: bool = True) -> int:
    """Hits per placed window: offsets t in [-(2^level+d), 2^level+d] whose
    t-step block orbit lands in the half-space.

    The count is read off the block (positive-real coefficients); with
    ``verify`` it is re-derived by direct functional evaluation over the
    whole window, which must agree.
    """
    block = av.blocks.get(level)
    if block is None:
        raise ValueError(f"no block at level {level}")
    count = block.positive_count()
    if verify:
        direct = 0
        span = block.radius + av.params.d
        base = block.vector(av.op)
        for t in range(-span, span + 1):
            if t >= 0:
                value = functional_eval(apply_power(av.op, base, t))
            else:
                value = functional_eval(_backward_orbit_vector(av.op, block, t))
            if value.re > 0:
                direct += 1
        if direct != count:
            raise RuntimeError(
                f"hit count mismatch at level {level}: block {count}, direct {direct}"
            )
    return count


def _backward_orbit_vector(op: ShiftOperator, block: CoefficientBlock,
                           step: int) -> LazyVector:
    """Coordinates of the step < 0 orbit of a block vector.

    Coordinate m collects the offset -m-step, scaled by w^(-m); no clipping
    happens for backward steps, so this is exact for every step <= 0.
    """
    if step > 0:
        raise ValueError("use apply_power for forward steps")
    w = op.weight
    lo = max(0, -step - block.radius)
    hi = -step + block.radius

    def coeff(m: int, _b=block, _s=step, _w=w) -> GaussianRational:
        a = _b.a(-m - _s)
        return a * (_w ** -m) if a else ZERO

    return LazyVector(coeff_fn=coeff, spans=((lo, hi + 1),))


@dataclass(frozen=True)
class ReturnSet:
    """Return times into the open half-space, materialized up to a horizon."""

    members: tuple[int, ...]
    horizon: int
    view: IntegerSetView

    def count_up_to(self, n: int) -> int:
        if n > self.horizon:
            raise ValueError("beyond materialization horizon")
        return bisect_right(self.members, n)


def return_set(av: AssembledVector, horizon: int, method: str = "sites") -> ReturnSet:
    """Materialize the return set to ``horizon``.

    ``sites`` walks candidate indices around the placed windows and keeps
    those whose functional value has positive real part; ``scan`` evaluates
    the functional at every index, with no structural shortcut.  Both routes
    are exact and must agree (the suite compares them).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if method == "scan":
        members = [n for n in range(1, horizon + 1)
                   if expansion_coefficient(av, n).re > 0]
    elif method == "sites":
        found: set[int] = set()
        for level in av.active_levels:
            block = av.blocks[level]
            offsets = block.positive_offsets()
            if not offsets:
                continue
            for k in site_members(av.params, level, horizon + block.radius):
                for j in offsets:
                    n = k - j
                    if 1 <= n <= horizon and expansion_coefficient(av, n).re > 0:
                        found.add(n)
        members = sorted(found)
    else:
        raise ValueError("method must be 'sites' or 'scan'")
    view = IntegerSetView(
        membership=lambda n: expansion_coefficient(av, n).re > 0,
        name="return-set",
    )
    return ReturnSet(members=tuple(members), horizon=horizon, view=view)


def checkpoint_count(av: AssembledVector, horizon: int) -> int:
    """#(return set in [1, horizon]) at a checkpoint horizon, by decomposition.

    At checkpoint horizons every placed window sits entirely on one side
    (the checkpoint-gap property), so the count splits exactly into
    per-level hit counts times site counts.  The identity is verified
    against direct materialization in the test suite.
    """
    if not is_checkpoint_horizon(av.params, horizon):
        raise ValueError(f"{horizon} is not a checkpoint horizon for these parameters")
    total = 0
    for level, block in av.blocks.items():
        hits = block.positive_count()
        if hits:
            total += hits * count_sites(av.params, level, horizon)
    return total


def predicted_density_limits(av: AssembledVector) -> tuple[Fraction, Fraction]:
    """Exact checkpoint-class density limits (lower from class 1, upper from class 2).

    Each active level contributes hits * limit * 2^(-2s-p-2) with the two
    selected-scale mass limits; raises when every block is hit-free, since
    the experiment would then be vacuous.
    """
    p = av.params.p
    lower = Fraction(0)
    upper = Fraction(0)
    any_hits = False
    for level, block in av.blocks.items():
        hits = block.positive_count()
        if not hits:
            continue
        any_hits = True
        weight = Fraction(hits, 2 ** (2 * level + p + 2))
        lower += weight * scale_mass_limit(0)
        upper += weight * scale_mass_limit(2)
    if not any_hits:
        raise ValueError("family has no positive-real coefficients; no return set")
    return lower, upper


def approach_bound(av: AssembledVector, level: int) -> float:
    """Bound on the distance from the n-step orbit point to the level's block
    vector, for n in the level's site set:

        (sum_{s < level} c(s)) * eps(level) + sum_{s >= level} c(s) * eps(s).

    The infinite tail is summed until its terms underflow; the doubly
    exponential decay makes the truncation exact in floating point.
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    op = av.op
    head = sum(float(av.budgets.budget(s)) for s in range(1, level)) \
        * tail_constant(op, level)
    tail = 0.0
    s = level
    while True:
        term = float(av.budgets.budget(s)) * tail_constant(op, s)
        tail += term
        s += 1
        if term == 0.0 or s > level + 64:
            break
    return head + tail


def verify_orbit_approach(av: AssembledVector, level: int, n: int,
                          tail_tol: float = 1e-9) -> bool:
    """Certified check that the n-step orbit point approaches the level block.

    ``n`` must lie in the level's site set.  The difference vector has
    coordinates (b(n+m) - a(-m)) * w^(-m); its certified norm (value plus
    tail) must stay within the closed-form bound plus ``tail_tol``.
    """
    params = av.params
    if not in_site_set(params, level, n):
        raise ValueError(f"{n} is not a level-{level} site")
    block = av.blocks[level]
    w = av.op.weight
    cap = av.coefficient_cap() + block.max_abs()

    def coeff(m: int) -> GaussianRational:
        delta = expansion_coefficient(av, n + m) - block.a(-m)
        return delta * (w ** -m) if delta else ZERO

    diff = LazyVector(
        coeff_fn=coeff,
        spans=((0, None),),
        decay=(cap, 1.0 / av.op.weight_float),
    )
    estimate = vector_norm(av.op, diff, tail_tol=min(tail_tol / 2, 1e-12))
    return estimate.upper <= approach_bound(av, level) + tail_tol


@dataclass(frozen=True)
class CheckpointRow:
    position: int
    exponent: int
    horizon: int
    label: str
    count: int
    ratio: Fraction
    predicted: Fraction


@dataclass(frozen=True)
class DensityExperiment:
    """Exact return-set ratios at checkpoints, split by checkpoint class.

    The separation flag is judged on the last ``tail_window`` rows only;
    early checkpoints predate the oscillation settling in.
    """

    rows: tuple[CheckpointRow, ...]
    hit_counts: dict[int, int]
    predicted_lower: Fraction
    predicted_upper: Fraction
    separation_flag: bool
    tail_window: int

    CSV_HEADER = ("l", "q", "horizon", "class", "count",
                  "ratio_num", "ratio_den", "ratio_float", "predicted_float")

    def write_csv(self, path: Path | str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(self.CSV_HEADER)
            for row in self.rows:
                writer.writerow((row.position, row.exponent, row.horizon,
                                 row.label, row.count,
                                 row.ratio.numerator, row.ratio.denominator,
                                 float(row.ratio), float(row.predicted)))

    def to_json_dict(self) -> dict:
        return {
            "tail_window": self.tail_window,
            "r_values": {str(level): count for level, count in sorted(self.hit_counts.items())},
            "predicted_lower": {
                "num": self.predicted_lower.numerator,
                "den": self.predicted_lower.denominator,
                "float": float(self.predicted_lower),
            },
            "predicted_upper": {
                "num": self.predicted_upper.numerator,
                "den": self.predicted_upper.denominator,
                "float": float(self.predicted_upper),
            },
            "separation_flag": self.separation_flag,
            "checkpoints": [
                {
                    "l": row.position, "q": row.exponent, "horizon": row.horizon,
                    "class": row.label, "count": row.count,
                    "ratio_num": row.ratio.numerator,
                    "ratio_den": row.ratio.denominator,
                    "ratio_float": float(row.ratio),
                    "predicted_float": float(row.predicted),
                }
                for row in self.rows
            ],
        }

    def write_json(self, path: Path | str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_json_dict(), handle, indent=2, sort_keys=True)


def density_experiment(av: AssembledVector, schedule: Checkpoints,
                       tail_window: int | None = None) -> DensityExperiment:
    """Exact per-checkpoint return-set ratios with the predicted class limits.

    The separation flag records whether every class-2 ratio strictly exceeds
    every class-1 ratio over the last ``tail_window`` checkpoints (default:
    the whole schedule, so pass the tested tail explicitly or set a window).
    """
    lower, upper = predicted_density_limits(av)
    rows = []
    for position, exponent, horizon, label in schedule.rows():
        count = checkpoint_count(av, horizon)
        ratio = Fraction(count, horizon)
        predicted = lower if label == CLASS1 else upper
        rows.append(CheckpointRow(position=position, exponent=exponent,
                                  horizon=horizon, label=label, count=count,
                                  ratio=ratio, predicted=predicted))
    window = len(rows) if tail_window is None else max(1, min(tail_window, len(rows)))
    tail = rows[-window:]
    class1 = [row.ratio for row in tail if row.label == CLASS1]
    class2 = [row.ratio for row in tail if row.label == CLASS2]
    separation = bool(class1 and class2 and max(class1) < min(class2))
    return DensityExperiment(rows=tuple(rows), hit_counts=av.hit_counts(),
                             predicted_lower=lower, predicted_upper=upper,
                             separation_flag=separation, tail_window=window)


def sign_cross_check(av: AssembledVector, oracle: SeriesOracle,
                     n_max: int, tail_tol: float = 1e-12) -> list[int]:
    """Orbit steps where the two functional routes disagree in sign.

    Agreement is demanded whenever the exact value's modulus exceeds twice
    ``tail_tol`` (floats from the series route are exact here too, but the
    guard keeps the contract honest).  Empty list = full agreement.
    """
    if n_max > oracle.horizon:
        raise ValueError("oracle horizon too small")
    bad: list[int] = []
    for n in range(1, n_max + 1):
        exact = orbit_functional(av, n)
        series = oracle.value(n)
        if float(abs(complex(exact))) <= 2 * tail_tol:
            continue
        if (exact.re > 0) != (series.real > tail_tol):
            bad.append(n)
    return bad
