"""Subcommand CLI: budget | audit | simulate | gradcheck.

Exit codes: 0 success, 1 runtime failure or failed verdict, 2 usage or
config error. ``budget``, ``audit``, and ``gradcheck`` take ``key=value``
arguments; ``simulate`` takes a config file plus ``--out``.

Examples:
    nfdp budget n=2880 k=2880 scheme=with base=log10
    nfdp budget n_total=3000 parties=10 k=3 scheme=with 'base=log10(values)'
    nfdp budget n=300 k=1..300 scheme=both base=both        # CSV sweep
    nfdp audit n_max=6
    nfdp audit n=3 k=1 scheme=without claim_epsilon=0 claim_delta=0
    nfdp --seed 7 --out runs/demo simulate run.cfg
    nfdp gradcheck trials=100 tolerance=1e-6
"""

from __future__ import annotations

import argparse
import math
import sys

from .accounting import (
    PrivacyBudget,
    SamplingScheme,
    budget_with_replacement,
    budget_without_replacement,
)
from .config import ConfigError, parse_config_file
from .federation import run_simulation
from .gradcheck import run_gradcheck
from .learner import TrainingDivergedError
from .oracle import (
    ClaimVerdict,
    EnumerationCapError,
    theorem_sweep_cells,
    verify_claim,
)


class UsageError(ValueError):
    """Bad flags or values: exits with status 2."""


def _parse_pairs(args: list[str], allowed: set[str]) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for arg in args:
        if "=" not in arg:
            raise UsageError(f"expected key=value, got {arg!r}")
        key, _, value = arg.partition("=")
        if key not in allowed:
            raise UsageError(f"unknown key {key!r} (expected one of {sorted(allowed)})")
        if key in pairs:
            raise UsageError(f"duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _parse_int(pairs: dict[str, str], key: str, default: int | None = None) -> int | None:
    if key not in pairs:
        return default
    try:
        return int(pairs[key])
    except ValueError as err:
        raise UsageError(f"{key} must be an integer, got {pairs[key]!r}") from err


def _parse_range(text: str, upper_name_value: int | None = None) -> list[int]:
    """Either a single integer or an inclusive range 'a..b' (b may be 'n')."""
    if ".." in text:
        low_text, _, high_text = text.partition("..")
        low = int(low_text)
        if high_text == "n":
            if upper_name_value is None:
                raise UsageError("range bound 'n' requires n to be given")
            high = upper_name_value
        else:
            high = int(high_text)
        if high < low:
            raise UsageError(f"empty range {text!r}")
        return list(range(low, high + 1))
    return [int(text)]


_BUDGET_BASES = ("nat", "log10", "both", "log10(values)")


def _budget_for(n: int, k: int, scheme: SamplingScheme) -> PrivacyBudget:
    if scheme is SamplingScheme.WITHOUT_REPLACEMENT:
        return budget_without_replacement(n, k)
    return budget_with_replacement(n, k)


def cmd_budget(args: list[str]) -> int:
    pairs = _parse_pairs(args, {"n", "k", "scheme", "base", "n_total", "parties"})
    base = pairs.get("base", "both")
    if base not in _BUDGET_BASES:
        raise UsageError(f"base must be one of {_BUDGET_BASES}")
    scheme_text = pairs.get("scheme", "with")
    if scheme_text == "both":
        schemes = list(SamplingScheme)
    else:
        try:
            schemes = [SamplingScheme.parse(scheme_text)]
        except ValueError as err:
            raise UsageError(str(err)) from err

    if "n_total" in pairs:
        if "n" in pairs:
            raise UsageError("give n or n_total, not both")
        n_total = _parse_int(pairs, "n_total")
        if "parties" not in pairs:
            raise UsageError("n_total requires parties")
        party_counts = _parse_range(pairs["parties"])
        ns = [n_total // p for p in party_counts]
    else:
        if "n" not in pairs:
            raise UsageError("n (or n_total with parties) is required")
        ns = [_parse_int(pairs, "n")]
    if "k" not in pairs:
        raise UsageError("k is required")
    try:
        ks = _parse_range(pairs["k"], upper_name_value=ns[0] if len(ns) == 1 else None)
    except ValueError as err:
        raise UsageError(f"bad k value: {pairs['k']!r}") from err

    try:
        cells = [(n, k, scheme) for n in ns for k in ks for scheme in schemes]
        budgets = [(n, k, scheme, _budget_for(n, k, scheme)) for n, k, scheme in cells]
    except ValueError as err:
        raise UsageError(str(err)) from err

    if len(budgets) == 1:
        n, k, scheme, budget = budgets[0]
        print(f"scheme={scheme.value} n={n} k={k}")
        if base in ("nat", "both"):
            print(f"epsilon_nat={budget.epsilon_nat:.10g}")
        if base in ("log10", "both"):
            print(f"epsilon_log10={budget.epsilon_log10:.6f}")
        if base == "log10(values)":
            print(f"log10_epsilon={math.log10(budget.epsilon_nat):.6f}")
            print(f"log10_delta={math.log10(budget.delta):.6f}")
        else:
            print(f"delta={budget.delta:.6f}")
        return 0
    print("n,k,scheme,epsilon_nat,epsilon_log10,delta")
    for n, k, scheme, budget in budgets:
        print(
            f"{n},{k},{scheme.value},{budget.epsilon_nat:.10g},{budget.epsilon_log10:.10g},{budget.delta:.10g}"
        )
    return 0


def _format_tight(verdict: ClaimVerdict, direction: str, swapped: bool) -> str:
    try:
        return f"{float(verdict.check(direction, swapped).tight_delta):.6f}"
    except KeyError:
        return "-"


def cmd_audit(args: list[str]) -> int:
    pairs = _parse_pairs(
        args, {"n_max", "schemes", "k_max_with", "n", "k", "scheme", "claim_epsilon", "claim_delta"}
    )
    single = "n" in pairs or "k" in pairs or "scheme" in pairs
    if single:
        n = _parse_int(pairs, "n")
        k = _parse_int(pairs, "k")
        if n is None or k is None or "scheme" not in pairs:
            raise UsageError("single-cell audit needs n, k, and scheme")
        try:
            scheme = SamplingScheme.parse(pairs["scheme"])
        except ValueError as err:
            raise UsageError(str(err)) from err
        claimed = None
        if "claim_epsilon" in pairs or "claim_delta" in pairs:
            if not ("claim_epsilon" in pairs and "claim_delta" in pairs):
                raise UsageError("claim override needs both claim_epsilon and claim_delta")
            claimed = PrivacyBudget(float(pairs["claim_epsilon"]), float(pairs["claim_delta"]))
        cells = [(n, k, scheme, claimed)]
    else:
        n_max = _parse_int(pairs, "n_max", 6)
        if n_max > 8:
            raise UsageError(f"n_max must be <= 8 (enumeration cap), got {n_max}")
        schemes_text = pairs.get("schemes", "without,with")
        try:
            schemes = tuple(SamplingScheme.parse(s) for s in schemes_text.split(","))
        except ValueError as err:
            raise UsageError(str(err)) from err
        k_max_with = _parse_int(pairs, "k_max_with", 6)
        cells = [
            (n, k, scheme, None)
            for n, k, scheme in theorem_sweep_cells(
                n_max=n_max, schemes=schemes, with_replacement_k_max=k_max_with
            )
        ]

    header = (
        f"{'n':>3} {'k':>3} {'scheme':>8} {'eps_nat':>10} {'delta':>10} "
        f"{'add_fwd':>10} {'add_rev':>10} {'rem_fwd':>10} {'rem_rev':>10}  verdict"
    )
    print(header)
    failures = 0
    for n, k, scheme, claimed in cells:
        try:
            verdict = verify_claim(n, k, scheme, claimed=claimed)
        except EnumerationCapError as err:
            raise UsageError(str(err)) from err
        ok = verdict.holds
        failures += 0 if ok else 1
        print(
            f"{n:>3} {k:>3} {scheme.value:>8} "
            f"{verdict.claimed.epsilon_nat:>10.6f} {verdict.claimed.delta:>10.6f} "
            f"{_format_tight(verdict, 'add', False):>10} {_format_tight(verdict, 'add', True):>10} "
            f"{_format_tight(verdict, 'remove', False):>10} {_format_tight(verdict, 'remove', True):>10}  "
            f"{'Holds' if ok else 'VIOLATED'}"
        )
    if failures:
        print(f"{failures} violation(s)")
        return 1
    print("all claims hold")
    return 0


def cmd_gradcheck(args: list[str], seed: int) -> int:
    pairs = _parse_pairs(args, {"trials", "tolerance"})
    trials = _parse_int(pairs, "trials", 100)
    if trials < 1:
        raise UsageError("trials must be >= 1")
    try:
        tolerance = float(pairs.get("tolerance", "1e-6"))
    except ValueError as err:
        raise UsageError("tolerance must be a float") from err
    report = run_gradcheck(trials=trials, tolerance=tolerance, seed=seed)
    print(f"trials={report.trials} tolerance={report.tolerance:g} max_rel_error={report.max_rel_error:.3e}")
    w = report.worst
    print(
        f"worst: trial={w.trial} loss={w.loss.value} {w.which}[{w.layer}]{list(w.index)} "
        f"analytic={w.analytic:.12g} numeric={w.numeric:.12g} rel={w.rel_error:.3e}"
    )
    if report.passed:
        print("gradient check passed")
        return 0
    print("gradient check FAILED")
    return 1


def cmd_simulate(config_path: str, out_dir: str | None, seed_override: int | None) -> int:
    from dataclasses import replace

    from .reporting import write_run_outputs

    if out_dir is None:
        raise UsageError("simulate requires --out DIRECTORY")
    config = parse_config_file(config_path)
    if seed_override is not None:
        config = replace(config, seed=seed_override)
    result = run_simulation(
        config.federation_config(),
        config.task(),
        config.plan(),
        pool_size=config.public_pool,
        public_distribution=config.public_distribution(),
        public_shift=config.public_shift,
        test_n=config.test_n,
    )
    paths = write_run_outputs(out_dir, config, result)
    mean_acc = sum(result.final_accuracy) / len(result.final_accuracy)
    print(f"final accuracy (mean over {len(result.final_accuracy)} parties): {mean_acc:.4f}")
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nfdp",
        description="federated model distillation simulator and sampling-privacy accounting toolkit",
    )
    parser.add_argument("--seed", type=int, default=None, help="64-bit master seed override")
    parser.add_argument("--out", default=None, help="output directory (simulate)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("budget", "closed-form (epsilon, delta) for subsample mechanisms"),
        ("audit", "brute-force divergence audit of the claimed budgets"),
        ("gradcheck", "finite-difference check of learner gradients"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("pairs", nargs="*", metavar="key=value")
    p_sim = sub.add_parser("simulate", help="run a federation experiment from a config file")
    p_sim.add_argument("config", help="path to key=value config file")

    ns = parser.parse_args(argv)
    try:
        if ns.command == "budget":
            return cmd_budget(ns.pairs)
        if ns.command == "audit":
            return cmd_audit(ns.pairs)
        if ns.command == "gradcheck":
            return cmd_gradcheck(ns.pairs, seed=ns.seed if ns.seed is not None else 0)
        return cmd_simulate(ns.config, ns.out, ns.seed)
    except (UsageError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (TrainingDivergedError, RuntimeError, OSError) as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
