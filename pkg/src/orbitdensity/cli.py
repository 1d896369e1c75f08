"""Batch experiment runner.

Subcommands: fact0, sets, verify, vector, orbit, all.  Configuration merges,
in increasing precedence: built-in defaults, a flat key=value config file,
ORBITDENSITY_* environment variables, command-line flags.  Every command is
deterministic given its configuration and exits 0 exactly when all enabled
checks pass.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import random
import sys
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from . import dyadic, vector as vec
from .densities import density_ratios
from .dyadic import (
    CheckReport,
    SeparationParams,
    checkpoint_schedule,
    checkpoints_between,
    count_sites,
    scale_mass,
    scale_mass_limit,
    site_set_view,
    strip_sites,
)
from .shift import ShiftOperator, tail_constant
from .vector import (
    AssembledVector,
    SeriesOracle,
    build_level_budgets,
    checkpoint_count,
    dense_family_blocks,
    density_experiment,
    one_block_family,
    return_set,
    sign_cross_check,
    site_hit_count,
    verify_orbit_approach,
)

ENV_PREFIX = "ORBITDENSITY_"


@dataclass(frozen=True)
class RunConfig:
    omega: str = "2"
    space: str = "l2"
    d: int = 1
    p_override: int | None = None
    smax: int = 6
    checkpoints: int = 9
    horizon: int = 2 ** 23
    series_horizon: int = 2 ** 14
    tail_tol: float = 1e-12
    family: str = "one-block"
    out: str = "out"
    seed: int = 0

    def params(self) -> SeparationParams:
        if self.p_override is not None:
            return SeparationParams(d=self.d, p=self.p_override)
        return SeparationParams.with_min_p(self.d)

    def operator(self) -> ShiftOperator:
        return ShiftOperator(weight=Fraction(self.omega),
                             space_exponent=_parse_space(self.space))

    def blocks(self, budgets):
        if self.family == "one-block":
            return one_block_family(budgets)
        if self.family == "enumerated":
            return dense_family_blocks(budgets)
        raise ValueError(f"unknown family {self.family!r}")


def _parse_space(text: str) -> float:
    text = text.strip().lower()
    if text == "c0":
        return math.inf
    if text == "l2":
        return 2.0
    if text.startswith("lp:"):
        value = float(text[3:])
        if value < 1:
            raise ValueError("space exponent must be >= 1")
        return value
    raise ValueError(f"unknown space {text!r} (use l2, c0, or lp:P)")


_INT_FIELDS = {"d", "p_override", "smax", "checkpoints", "horizon",
               "series_horizon", "seed"}
_FLOAT_FIELDS = {"tail_tol"}


def _coerce(name: str, raw: str):
    if name in _INT_FIELDS:
        return int(raw)
    if name in _FLOAT_FIELDS:
        return float(raw)
    return raw


def load_config_file(path: str | Path) -> dict:
    """Flat key=value lines; blank lines and # comments ignored."""
    values: dict = {}
    known = {f.name for f in fields(RunConfig)}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return values


def _env_overrides() -> dict:
    values: dict = {}
    for f in fields(RunConfig):
        raw = os.environ.get(ENV_PREFIX + f.name.upper())
        if raw is not None:
            values[f.name] = _coerce(f.name, raw)
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config:
        config = replace(config, **load_config_file(args.config))
    config = replace(config, **_env_overrides())
    cli_values = {}
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            cli_values[f.name] = value
    return replace(config, **cli_values)


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_fact0(config: RunConfig, a_lo: int, a_hi: int, b_max: int) -> int:
    """Tabulate the selected-scale mass against its residue-class limits."""
    out = _out_dir(config)
    rows = dyadic.mass_table_rows(a_lo, a_hi, b_max)
    with open(out / "fact0.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(dyadic.MASS_TABLE_HEADER)
        writer.writerows(rows)
    failures = 0
    sup_bound = dyadic.MASS_SUP_BOUND
    for a in range(a_lo, a_hi + 1):
        for b in range(a + 1, b_max + 1):
            s = scale_mass(a, b)
            if s > sup_bound:
                failures += 1
            if abs(s - scale_mass_limit(b % 5)) > 64 * Fraction(2 ** a, 2 ** b):
                failures += 1
    print(f"fact0: {len(rows)} rows, {failures} failures -> {out / 'fact0.csv'}")
    return 0 if failures == 0 else 1


def cmd_sets(config: RunConfig) -> int:
    """Per-level site-set density reports along the checkpoint schedule."""
    out = _out_dir(config)
    params = config.params()
    schedule = checkpoint_schedule(params, config.checkpoints)
    horizons = [n for n in schedule.horizons if n <= config.horizon]
    if not horizons:
        print("sets: no checkpoint horizons within --horizon", file=sys.stderr)
        return 2
    for level in range(1, config.smax + 1):
        report = density_ratios(site_set_view(params, level), horizons)
        report.write_csv(out / f"sets_level{level}.csv")
        print(f"sets: level {level} tail ratio in "
              f"[{float(report.running_min):.6g}, {float(report.running_max):.6g}]")
    return 0


def _report_counting_bounds(params: SeparationParams, max_level: int,
                            max_scale: int) -> CheckReport:
    violation = None
    for level in range(1, max_level + 1):
        for scale in range(params.min_scale(level), max_scale + 1):
            count = len(strip_sites(params, level, scale))
            expected = 2 ** (scale - 2 * level - params.p - 1)
            if not expected - 2 <= count <= expected:
                violation = {"condition": "site_count", "level": level,
                             "scale": scale, "count": count,
                             "required": [expected - 2, expected]}
                break
        if violation:
            break
    return CheckReport("counting_bounds", {"d": params.d, "p": params.p},
                       {"max_level": max_level, "max_scale": max_scale},
                       violation is None, violation)


def _report_mass_bound(params: SeparationParams, max_level: int,
                       schedule) -> CheckReport:
    bound_num = dyadic.MASS_SUP_BOUND
    violation = None
    for level in range(1, max_level + 1):
        cap = bound_num * Fraction(1, 2 ** (2 * level + params.p + 1))
        for q, horizon in zip(schedule.exponents, schedule.horizons):
            ratio = Fraction(count_sites(params, level, horizon), horizon)
            if ratio > cap:
                violation = {"condition": "mass_bound", "level": level, "q": q,
                             "ratio": str(ratio), "required": str(cap)}
                break
        if violation:
            break
    return CheckReport("mass_bound", {"d": params.d, "p": params.p},
                       {"max_level": max_level,
                        "checkpoints": len(schedule)},
                       violation is None, violation)


def _report_class_limits(params: SeparationParams, max_level: int) -> CheckReport:
    violation = None
    try:
        schedule = checkpoints_between(params, 20, 32)
    except ValueError:
        schedule = checkpoint_schedule(params, 6)
    for level in range(1, max_level + 1):
        base = Fraction(1, 2 ** (2 * level + params.p + 2))
        for q, horizon, label in zip(schedule.exponents, schedule.horizons,
                                     schedule.classes):
            limit = base * scale_mass_limit(0 if label == dyadic.CLASS1 else 2)
            ratio = Fraction(count_sites(params, level, horizon), horizon)
            if abs(ratio - limit) > Fraction(2, 100) * limit:
                violation = {"condition": "class_limit", "level": level,
                             "q": q, "ratio": str(ratio), "limit": str(limit)}
                break
        if violation:
            break
    return CheckReport("class_limits", {"d": params.d, "p": params.p},
                       {"max_level": max_level,
                        "q_range": [schedule.exponents[0], schedule.exponents[-1]]},
                       violation is None, violation)


def cmd_verify(config: RunConfig) -> int:
    """Run the hypothesis suite and write one JSON report per check."""
    out = _out_dir(config)
    params = config.params()
    max_level = min(config.smax, 4)
    horizon = min(config.horizon, 2 ** 20)
    reports = [
        dyadic.verify_separation(params, max_level, horizon),
        dyadic.verify_checkpoint_gap(params, max_level, min(config.checkpoints, 8)),
        _report_counting_bounds(params, min(config.smax, 5), 26),
        _report_mass_bound(params, min(config.smax, 3),
                           checkpoint_schedule(params, config.checkpoints)),
        _report_class_limits(params, min(config.smax, 3)),
    ]
    _write_json(out / "verify_report.json", [r.to_json_dict() for r in reports])
    for report in reports:
        print(f"verify: {report.check}: {'pass' if report.passed else 'FAIL'}")
    return 0 if all(r.passed for r in reports) else 1


def _build_vector(config: RunConfig) -> AssembledVector:
    params = config.params()
    op = config.operator()
    budgets = build_level_budgets(op, config.smax)
    return AssembledVector(params, op, budgets, config.blocks(budgets))


def cmd_vector(config: RunConfig) -> int:
    """Build the family and check its per-level quantities."""
    out = _out_dir(config)
    av = _build_vector(config)
    rng = random.Random(config.seed)
    hit_counts = {level: site_hit_count(av, level, verify=True)
                  for level in range(1, config.smax + 1)}
    lower, upper = vec.predicted_density_limits(av)

    approach = []
    sample_horizon = min(config.horizon, 2 ** 16)
    for level in range(1, min(config.smax, 4) + 1):
        members = dyadic.site_members(av.params, level, sample_horizon)
        if not members:
            continue
        picks = rng.sample(members, min(5, len(members)))
        passed = all(verify_orbit_approach(av, level, n, tail_tol=1e-9)
                     for n in picks)
        approach.append({"level": level, "samples": sorted(picks), "pass": passed})

    payload = {
        "family": config.family,
        "omega": str(av.op.weight),
        "space_exponent": ("sup" if av.op.is_sup_space else av.op.space_exponent),
        "r_values": {str(level): count for level, count in hit_counts.items()},
        "predicted_lower": {"num": lower.numerator, "den": lower.denominator,
                            "float": float(lower)},
        "predicted_upper": {"num": upper.numerator, "den": upper.denominator,
                            "float": float(upper)},
        "tail_constants": {str(s): tail_constant(av.op, s)
                           for s in range(1, config.smax + 1)},
        "budget_partials": list(av.budgets.weighted_partials),
        "approach_checks": approach,
    }
    _write_json(out / "vector_report.json", payload)
    ok = all(entry["pass"] for entry in approach)
    print(f"vector: family={config.family} r={hit_counts} "
          f"approach={'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_orbit(config: RunConfig) -> int:
    """Density experiment, sign cross-check, and decomposition identity."""
    out = _out_dir(config)
    av = _build_vector(config)
    schedule = checkpoint_schedule(av.params, config.checkpoints)

    experiment = density_experiment(av, schedule,
                                    tail_window=min(6, len(schedule)))
    experiment.write_csv(out / "orbit_density.csv")
    _write_json(out / "orbit_summary.json",
                {"family": config.family, **experiment.to_json_dict()})

    oracle = SeriesOracle(av, config.series_horizon)
    disagreements = sign_cross_check(av, oracle, config.series_horizon,
                                     tail_tol=config.tail_tol)

    identity_ok = True
    scan_cap = min(config.horizon, 2 ** 18)
    for horizon in schedule.horizons:
        if horizon > scan_cap:
            continue
        direct = len(return_set(av, horizon, method="scan").members)
        if direct != checkpoint_count(av, horizon):
            identity_ok = False

    ok = (not disagreements) and identity_ok and experiment.separation_flag
    print(f"orbit: separation={experiment.separation_flag} "
          f"sign_disagreements={len(disagreements)} identity={'pass' if identity_ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_all(config: RunConfig) -> int:
    code = 0
    code = max(code, cmd_fact0(config, 0, 12, 65))
    code = max(code, cmd_sets(config))
    code = max(code, cmd_verify(config))
    code = max(code, cmd_vector(config))
    code = max(code, cmd_orbit(config))
    return code


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--omega", help="shift weight as a rational, e.g. 2 or 5/2")
    parser.add_argument("--space", help="l2, c0, or lp:P")
    parser.add_argument("--d", type=int, help="guard radius (default 1)")
    parser.add_argument("--p", dest="p_override", type=int,
                        help="force the alignment exponent")
    parser.add_argument("--smax", type=int, help="number of levels (default 6)")
    parser.add_argument("--checkpoints", type=int,
                        help="number of checkpoint horizons (default 9)")
    parser.add_argument("--horizon", type=int,
                        help="combinatorial horizon cap (default 2^23)")
    parser.add_argument("--series-horizon", dest="series_horizon", type=int,
                        help="series-oracle horizon (default 2^14)")
    parser.add_argument("--tail-tol", dest="tail_tol", type=float,
                        help="norm tail tolerance (default 1e-12)")
    parser.add_argument("--family", choices=["one-block", "enumerated"],
                        help="coefficient family (default one-block)")
    parser.add_argument("--out", help="output directory (default out)")
    parser.add_argument("--seed", type=int, help="seed for sampled sweeps")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbitdensity",
        description="Exact return-time density experiments for weighted shift orbits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fact0 = sub.add_parser("fact0", help="selected-scale mass table and checks")
    fact0.add_argument("--a-min", type=int, default=0)
    fact0.add_argument("--a-max", type=int, default=12)
    fact0.add_argument("--b-max", type=int, default=65)
    _add_common(fact0)

    for name, help_text in [
        ("sets", "site-set density reports"),
        ("verify", "hypothesis suite JSON report"),
        ("vector", "family construction report"),
        ("orbit", "density experiment and cross-checks"),
        ("all", "run every command"),
    ]:
        _add_common(sub.add_parser(name, help=help_text))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        config = build_config(args)
        if args.command == "fact0":
            if not (0 <= args.a_min <= args.a_max < args.b_max):
                print("fact0: need 0 <= a-min <= a-max < b-max", file=sys.stderr)
                return 2
            return cmd_fact0(config, args.a_min, args.a_max, args.b_max)
        if args.command == "sets":
            return cmd_sets(config)
        if args.command == "verify":
            return cmd_verify(config)
        if args.command == "vector":
            return cmd_vector(config)
        if args.command == "orbit":
            return cmd_orbit(config)
        if args.command == "all":
            return cmd_all(config)
        raise AssertionError(args.command)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
