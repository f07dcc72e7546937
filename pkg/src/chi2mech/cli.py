"""Command-line front end.

Subcommands map one-to-one onto the design entry points:

    chi2mech design    scenario.json   # base design, JSON report
    chi2mech sweep     scenario.json   # budget (or alpha) sweep, CSV
    chi2mech adversary scenario.json   # fixed-channel design, JSON report
    chi2mech provider  scenario.json   # provider-side design, JSON report

Exit codes: 0 success, 1 parse/validation failure, 2 infeasible budget,
3 numerically singular input. ``CHI2MECH_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import design_adversarial_mechanism, invert_binary_channel
from .designer import Mechanism, build_w, derive_px, design_mechanism
from .errors import (
    Chi2MechError,
    InfeasibleEpsilonError,
    ScenarioError,
    SingularMatrixError,
    ValidationError,
)
from .infometrics import chi2_information, error_probability, mmse_binary, to_bits
from .oracle import BinaryGridSearch, randomized_search
from .provider import ProviderScenario, design_provider_mechanism
from .scenario import Scenario, bsc_matrix, load_scenario

log = logging.getLogger("chi2mech")

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3

SWEEP_HEADER = "eps,approx_utility_nats,exact_utility_nats,oracle_utility_nats,leakage_mi_nats,chi2_max"
TRADEOFF_HEADER = "alpha,eps,mmse_designed,mmse_baseline,perr_designed,perr_baseline"


def _fmt(value: float) -> str:
    """Fixed 12-significant-digit decimal formatting for CSV determinism."""
    return format(float(value), ".12g")


def _vec(arr) -> list[float]:
    return [float(v) for v in np.asarray(arr).ravel()]


def _mat(arr) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.asarray(arr)]


def _mechanism_dict(mechanism: Mechanism) -> dict:
    return {
        "p_u": _vec(mechanism.pu.entries),
        "output_conditionals": [_vec(c.entries) for c in mechanism.output_conditionals],
        "posteriors": [_vec(p.entries) for p in mechanism.posteriors],
        "kernel": _mat(mechanism.kernel.entries),
        "epsilon": mechanism.epsilon,
    }


def _apply_overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    from dataclasses import replace

    updates: dict = {}
    if getattr(args, "budget", None):
        updates["budget"] = args.budget
    oracle = scenario.oracle
    if getattr(args, "oracle_resolution", None):
        oracle = type(oracle)(args.oracle_resolution, oracle.samples, oracle.seed)
    if getattr(args, "seed", None) is not None:
        oracle = type(oracle)(oracle.resolution, oracle.samples, args.seed)
    if oracle is not scenario.oracle:
        updates["oracle"] = oracle
    return replace(scenario, **updates) if updates else scenario


def _require_epsilon(scenario: Scenario) -> float:
    if scenario.epsilon is None:
        raise ScenarioError("epsilon: required for this command")
    return scenario.epsilon


def run_design(scenario: Scenario) -> dict:
    if scenario.leakage is None:
        raise ScenarioError(
            "leakage: required for the design command (alpha_sweep scenarios are sweep-only)"
        )
    eps = _require_epsilon(scenario)
    eff = scenario.effective_epsilon(eps)
    mechanism, report = design_mechanism(scenario.leakage, scenario.p_y, eff)
    px = derive_px(scenario.leakage, scenario.p_y)
    coeff = 0.5 * report.sigma_max**2
    return {
        "kind": "base",
        "schema_version": 1,
        "description": scenario.description,
        "budget": scenario.budget,
        "epsilon": eps,
        "effective_epsilon": eff,
        "p_y": _vec(scenario.p_y.entries),
        "p_x": _vec(px.entries),
        "leakage_matrix": _mat(scenario.leakage.entries),
        "w": _mat(build_w(scenario.leakage, scenario.p_y).w),
        "singular_values": list(report.singular_values),
        "sigma_max": report.sigma_max,
        "l_star": _vec(report.l_star.l),
        "output_shift": _vec(scenario.leakage.inverse() @ report.l_star.j),
        "mechanism": _mechanism_dict(mechanism),
        "utility": {
            "approx_nats": report.approx_utility_nats,
            "approx_bits": to_bits(report.approx_utility_nats),
            "exact_nats": report.exact_utility_nats,
            "exact_bits": to_bits(report.exact_utility_nats),
            "coefficient_nats": coeff,
            "coefficient_bits": to_bits(coeff),
        },
        "leakage": {
            "mutual_information_nats": report.leakage_mi_nats,
            "chi2_per_letter": list(report.chi2_per_letter),
            "chi2_information": chi2_information(
                list(mechanism.posteriors), mechanism.pu, px
            ),
        },
        "epsilon_bounds": {
            "apriori_leakage_approx": report.eps_bound_leakage_approx,
            "apriori_utility_approx": report.eps_bound_utility_approx,
            "posthoc": report.eps_bound_posthoc,
        },
        "lambda_min": report.lambda_min,
        "above_apriori_bounds": report.above_apriori_bounds,
    }


def run_adversary(scenario: Scenario) -> dict:
    eps = _require_epsilon(scenario)
    eff = scenario.effective_epsilon(eps)
    channel = invert_binary_channel(scenario.channel)
    mechanism, report = design_adversarial_mechanism(
        scenario.leakage, scenario.p_y, channel, eff
    )
    return {
        "kind": "adversary",
        "schema_version": 1,
        "description": scenario.description,
        "budget": scenario.budget,
        "epsilon": eps,
        "effective_epsilon": eff,
        "channel": _mat(scenario.channel.entries),
        "inverse_coefficients": {
            "a": report.coefficients[0],
            "b": report.coefficients[1],
            "c": report.coefficients[2],
            "d": report.coefficients[3],
        },
        "coefficient_class": report.coefficient_class,
        "sigma_max": report.sigma,
        "psi": _vec(report.psi.l),
        "p_u": _vec(report.pu.entries),
        "p_u_prime": _vec(report.pu_prime.entries),
        "mechanism": _mechanism_dict(mechanism),
        "utility": {
            "approx_nats": report.approx_utility_nats,
            "approx_bits": to_bits(report.approx_utility_nats),
            "exact_nats": report.exact_utility_nats,
            "exact_bits": to_bits(report.exact_utility_nats),
            "coefficient_nats": report.approx_utility_nats / eff**2,
        },
        "audits": {
            "chi2_u_prime": list(report.chi2_u_prime),
            "chi2_u": list(report.chi2_u),
            "induced_bounds_u": list(report.induced_bounds),
            "chi2_information_u": report.chi2_information_u,
            "chi2_information_u_prime": report.chi2_information_u_prime,
        },
        "epsilon_bounds": {"posthoc": report.eps_bound_posthoc},
    }


def run_provider(scenario: Scenario) -> dict:
    eps = _require_epsilon(scenario)
    eff = scenario.effective_epsilon(eps)
    prov = ProviderScenario(scenario.p_y_given_x, scenario.p_z_given_x, scenario.p_x)
    mechanism, report = design_provider_mechanism(prov, eff)
    return {
        "kind": "provider",
        "schema_version": 1,
        "description": scenario.description,
        "budget": scenario.budget,
        "epsilon": eps,
        "effective_epsilon": eff,
        "p_x": _vec(prov.px.entries),
        "p_y": _vec(prov.py.entries),
        "p_z": _vec(prov.pz.entries),
        "case": report.case,
        "singular_values_w1": _vec(report.w1.singular_values),
        "singular_values_w2": _vec(report.w2.singular_values),
        "singular_values_product": _vec(report.product.singular_values),
        "selected_sigma": report.selected_sigma,
        "chosen_direction": _vec(report.chosen_direction.l),
        "mechanism": _mechanism_dict(mechanism),
        "utility": {
            "approx_nats": report.approx_utility_nats,
            "approx_bits": to_bits(report.approx_utility_nats),
            "exact_nats": report.exact_utility_nats,
            "exact_bits": to_bits(report.exact_utility_nats),
            "coefficient_nats": report.approx_utility_nats / eff**2,
        },
        "protection": {
            "mutual_information_nats": report.protected_mi_nats,
            "chi2_per_letter": list(report.chi2_per_letter),
        },
        "epsilon_bounds": {
            "posthoc": report.eps_bound_posthoc,
            "posthoc_is_analogy": report.eps_bound_is_analogy,
        },
    }


def _base_sweep_rows(scenario: Scenario) -> list[str]:
    if scenario.sweep is None:
        raise ScenarioError("sweep: required for the sweep command")
    rows = []
    grid = None
    if scenario.leakage.n_inputs == 2:
        grid = BinaryGridSearch(
            scenario.leakage, scenario.p_y, scenario.oracle.resolution
        )
    for eps in scenario.sweep.values():
        eps = float(eps)
        eff = scenario.effective_epsilon(eps)
        _, report = design_mechanism(scenario.leakage, scenario.p_y, eff)
        if grid is not None:
            found = grid.search(eff)
        else:
            found = randomized_search(
                scenario.leakage,
                scenario.p_y,
                eff,
                scenario.oracle.samples,
                scenario.oracle.seed,
            )
        rows.append(
            ",".join(
                _fmt(v)
                for v in (
                    eps,
                    report.approx_utility_nats,
                    report.exact_utility_nats,
                    found.best_utility_nats,
                    report.leakage_mi_nats,
                    max(report.chi2_per_letter),
                )
            )
        )
    return rows


def tradeoff_point(alpha: float, p_y, eps_eff: float) -> tuple[float, float, float, float]:
    """One point of the estimation-error / error-probability trade-off.

    Returns (mmse_designed, mmse_baseline, perr_designed, perr_baseline).
    The designed error probability uses the label pairing that matches U to
    its most likely output symbol (relabeling is free: utility, leakage and
    every audit are label-invariant); the designed estimation error is the
    worst case over the two disclosed letters. The baseline is the
    zero-budget mechanism, whose disclosed symbol is independent of
    everything: constant one-half error and prior variance.
    """
    leakage = bsc_matrix(alpha)
    mechanism, _ = design_mechanism(leakage, p_y, eps_eff)
    px = derive_px(leakage, p_y)
    perr = error_probability(mechanism.pu, mechanism.output_conditionals)
    swapped = mechanism.relabeled()
    perr_swapped = error_probability(swapped.pu, swapped.output_conditionals)
    if perr_swapped < perr:
        mechanism, perr = swapped, perr_swapped
    mmse_designed = min(mmse_binary(p) for p in mechanism.posteriors)
    mmse_baseline = mmse_binary(px)
    perr_baseline = error_probability(mechanism.pu, (p_y, p_y))
    return mmse_designed, mmse_baseline, perr, perr_baseline


def _tradeoff_rows(scenario: Scenario) -> list[str]:
    if scenario.epsilon is None and scenario.sweep is None:
        raise ScenarioError("epsilon: an epsilon or sweep block is required")
    eps_values = (
        [scenario.epsilon] if scenario.sweep is None else list(scenario.sweep.values())
    )
    rows = []
    for alpha in scenario.alpha_sweep.values():
        for eps in eps_values:
            eps = float(eps)
            eff = scenario.effective_epsilon(eps)
            mmse_d, mmse_b, perr_d, perr_b = tradeoff_point(
                float(alpha), scenario.p_y, eff
            )
            rows.append(
                ",".join(_fmt(v) for v in (alpha, eps, mmse_d, mmse_b, perr_d, perr_b))
            )
    return rows


def run_sweep(scenario: Scenario) -> tuple[str, list[str]]:
    if scenario.kind != "base":
        raise ScenarioError("kind: the sweep command supports kind 'base' only")
    if scenario.alpha_sweep is not None:
        return TRADEOFF_HEADER, _tradeoff_rows(scenario)
    return SWEEP_HEADER, _base_sweep_rows(scenario)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, newline="\n")


def _emit_json(obj: dict, out: str | None) -> None:
    _emit(json.dumps(obj, indent=2) + "\n", out)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("scenario", help="path to a scenario JSON file")
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    parser.add_argument(
        "--format",
        choices=("json", "csv"),
        default=None,
        help="output format (design/adversary/provider: json; sweep: csv)",
    )
    parser.add_argument(
        "--oracle-resolution",
        type=int,
        default=None,
        help="override the scenario's exhaustive-search resolution",
    )
    parser.add_argument(
        "--budget",
        choices=("eps2", "half-eps2"),
        default=None,
        help="per-letter budget convention (chi2 <= eps^2 or eps^2/2)",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="override the randomized-search seed"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chi2mech",
        description="Design and audit strongly chi-square-private disclosure mechanisms.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("design", "solve a base scenario and emit a JSON report"),
        ("sweep", "sweep the budget (or alpha) and emit plot-ready CSV"),
        ("adversary", "solve a fixed-channel adversary scenario"),
        ("provider", "solve a provider-side scenario"),
    ):
        _add_common(sub.add_parser(name, help=help_text))
    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("CHI2MECH_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        try:
            level = int(level_name)
        except ValueError:
            level = logging.WARNING
    logging.basicConfig(level=level, format="%(name)s %(levelname)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        scenario = _apply_overrides(load_scenario(args.scenario), args)
        if args.command == "sweep":
            if args.format == "json":
                raise ScenarioError("--format json is not supported for sweep output")
            header, rows = run_sweep(scenario)
            _emit("\n".join([header, *rows]) + "\n", args.out)
        else:
            if args.format == "csv":
                raise ScenarioError(
                    "--format csv is only supported for the sweep command"
                )
            runner = {
                "design": run_design,
                "adversary": run_adversary,
                "provider": run_provider,
            }[args.command]
            if args.command == "design" and scenario.kind != "base":
                raise ScenarioError("kind: the design command requires kind 'base'")
            if args.command == "adversary" and scenario.kind != "adversary":
                raise ScenarioError("kind: expected an adversary scenario")
            if args.command == "provider" and scenario.kind != "provider":
                raise ScenarioError("kind: expected a provider scenario")
            _emit_json(runner(scenario), args.out)
    except (ScenarioError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleEpsilonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SingularMatrixError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Chi2MechError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
