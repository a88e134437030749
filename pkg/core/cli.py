"""
Command-line interface.

Subcommands:
    validate-model   parse and check a model document
    build-matrix     export the (reduced) incidence matrix, optionally partitioned
    validate-ci      compare reported against reconstructed carbon intensity
    run              dispatch scenarios; write dispatch, monthly, comparison, histograms
    compare          dispatch scenarios across zones; write comparison (+ DOCX report)

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

import os
import argparse
import logging
from core import settings
from core.errors import InputError, NumericalError
from core.system_model import bundled_model_path, load_system_model, validate_model
from core.hfgt import build_incidence_matrix, export_matrix_csv, export_matrix_json, partition
from core.data_ingest import (
    EmissionFactorTable, aggregate_zones, align_series, load_adapter,
    load_emission_factors, load_generation_series, load_price_series, validate_reported_ci,
)
from core.scenarios import (
    CI_SOURCES, SCENARIO_KINDS, ScenarioConfig, grid_models_for, hour_ci, load_rule, load_scenario,
    run_scenario,
)
from core.econ import (
    EconParams, build_comparison, export_histograms, export_outputs, load_econ,
    monthly_for_runs, write_frame,
)
from core.file_handler import build_docx_report, save_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2


# ============================================================
# Shared loading
# ============================================================
def _model(args):
    path = args.model or bundled_model_path()
    model = load_system_model(path)
    logger.debug("Model loaded from %s", path)
    return model


def _ef(args) -> EmissionFactorTable:
    return load_emission_factors(args.ef) if args.ef else EmissionFactorTable.default()


def _adapter(path):
    return load_adapter(path) if path else None


def _zones(records, zone):
    zones = sorted({r.zone for r in records})
    if zone:
        if zone not in zones:
            raise InputError(f"zone '{zone}' not found (available: {', '.join(zones) or 'none'})")
        return [zone]
    return zones


def _filter_year(records, year):
    if year is None:
        return records
    kept = [r for r in records if r.timestamp.year == year]
    if not kept:
        raise InputError(f"no records in year {year}")
    return kept


def _scenarios(args) -> list[ScenarioConfig]:
    rule = load_rule(args.rule) if args.rule else None
    entries = args.scenario or list(SCENARIO_KINDS)
    configs = []
    for entry in entries:
        if entry == "baseline":
            configs.append(ScenarioConfig.baseline())
        elif entry == "green-rule":
            configs.append(ScenarioConfig.green_rule(rule))
        elif entry == "credit-threshold":
            configs.append(ScenarioConfig.credit_threshold())
        else:
            configs.append(load_scenario(entry, rule=rule))
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise InputError(f"duplicate scenario names: {', '.join(names)}")
    return configs


def _series(args) -> list:
    grid = _filter_year(load_generation_series(args.generation, _adapter(args.gen_adapter)), args.year)
    prices = _filter_year(
        load_price_series(args.prices, _adapter(args.price_adapter), max_gap_hours=args.max_gap),
        args.year,
    )
    aligned = [align_series(grid, prices, zone=z) for z in _zones(grid, args.zone)]
    if args.national:
        aligned = [aggregate_zones(aligned, zone=args.national)]
    return aligned


def _dispatch_all(args):
    model = _model(args)
    econ = load_econ(args.econ) if args.econ else EconParams()
    configs = _scenarios(args)
    ef = _ef(args)
    series_list = _series(args)

    grid_models = grid_models_for(model, configs)
    results = {}
    for series in series_list:
        for config in configs:
            results[(series.zone, config.name)] = run_scenario(
                series, config, econ, grid_models[config.electrolyzer.specific_energy],
                ef=ef, ci_source=args.ci_source,
            )
    return series_list, results, ef, econ


# ============================================================
# Commands
# ============================================================
def cmd_validate_model(args) -> int:
    model = _model(args)
    report = validate_model(model)
    for violation in report:
        print(f"{violation.code}\t{violation.subject}\t{violation.message}")
    if not report.ok:
        logger.error("Model has %d violation(s)", len(report))
        return EXIT_INPUT
    print(
        f"OK: {len(model.operands)} operands, {len(model.processes)} processes, "
        f"{len(model.resources)} resources, {len(model.capabilities)} capabilities"
    )
    return EXIT_OK


def cmd_build_matrix(args) -> int:
    model = _model(args)
    m = build_incidence_matrix(model, reduce=not args.full)
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, f"matrix.{args.format}")
    (export_matrix_csv if args.format == "csv" else export_matrix_json)(m, path)
    print(f"{path}: {m.shape[0]} rows x {m.shape[1]} columns")

    if args.aspects is not None:
        aspects = [a.strip() for a in args.aspects.split(",") if a.strip()]
        part = partition(m, aspects)
        print(f"A: {part.A.shape[0]}x{part.A.shape[1]}, B: {part.B.shape[0]}x{part.B.shape[1]}")
    return EXIT_OK


def cmd_validate_ci(args) -> int:
    grid = _filter_year(load_generation_series(args.generation, _adapter(args.gen_adapter)), args.year)
    ef = _ef(args)
    os.makedirs(args.out_dir, exist_ok=True)
    for zone in _zones(grid, args.zone):
        report = validate_reported_ci([r for r in grid if r.zone == zone], ef, tol=args.tol)
        path = os.path.join(args.out_dir, f"ci_validation_{zone}.{args.format}")
        frame = report.to_frame()
        frame["timestamp"] = frame["timestamp"].map(lambda t: t.isoformat())
        write_frame(frame, path, args.format)
        print(
            f"{zone}: {len(report.deviations)} hours, max deviation {report.max_deviation:.3f}, "
            f"mean {report.mean_deviation:.3f}, {len(report.flagged)} flagged (tol {report.tolerance:g})"
        )
    return EXIT_OK


def cmd_run(args) -> int:
    series_list, results, ef, econ = _dispatch_all(args)
    comparison = build_comparison(results, econ)
    written = export_outputs(monthly_for_runs(results, econ), comparison, args.format, args.out_dir, dispatch=results)
    for series in series_list:
        written += export_histograms(
            hour_ci(series, ef, args.ci_source), series.prices, args.format, args.out_dir, zone=series.zone,
        )
    for row in comparison:
        print(f"{row.zone}\t{row.scenario}\t{row.h2_t:.3f} t H2\t{row.emissions_t:.3f} t CO2eq")
    logger.info("Outputs: %s", ", ".join(os.path.basename(p) for p in written))
    return EXIT_OK


def cmd_compare(args) -> int:
    _, results, _, econ = _dispatch_all(args)
    comparison = build_comparison(results, econ)
    monthly = monthly_for_runs(results, econ)
    export_outputs(monthly, comparison, args.format, args.out_dir)
    if args.report:
        notes = [f"Scenarios: {', '.join(sorted({s for _, s in results}))}", f"CI source: {args.ci_source}"]
        save_report(build_docx_report(comparison, monthly, notes=notes), args.report)
        print(f"Report: {args.report}")
    for row in comparison:
        cost = "" if row.cost_per_kg is None else f"{row.cost_per_kg:.2f} AUD/kg"
        print(f"{row.zone}\t{row.scenario}\t{row.h2_t:.3f} t H2\t{cost}")
    return EXIT_OK


# ============================================================
# Parser
# ============================================================
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="h2lca",
        description="Grid-to-hydrogen life-cycle and scenario engine",
    )
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_arg(p):
        p.add_argument("--model", help="Model document (default: bundled australia-h2)")

    def output_args(p):
        p.add_argument("--out-dir", default=settings.OUTPUT_DIR, help="Output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    def series_args(p, prices: bool = True):
        p.add_argument("--generation", required=True, help="Generation CSV")
        p.add_argument("--gen-adapter", help="Adapter JSON for the generation file")
        if prices:
            p.add_argument("--prices", required=True, help="Price CSV")
            p.add_argument("--price-adapter", help="Adapter JSON for the price file")
            p.add_argument("--max-gap", type=float, default=None, help="Max tolerated missing price hours")
        p.add_argument("--ef", help="Emission factor CSV (source,factor_g_per_kwh)")
        p.add_argument("--zone", help="Zone to process (default: every zone)")
        p.add_argument("--year", type=int, help="Restrict to one calendar year (UTC)")

    p = sub.add_parser("validate-model", help="Parse and validate a model document")
    model_arg(p)
    p.set_defaults(func=cmd_validate_model)

    p = sub.add_parser("build-matrix", help="Export the incidence matrix")
    model_arg(p)
    output_args(p)
    p.add_argument("--full", action="store_true", help="Keep zero rows")
    p.add_argument("--aspects", help="Comma-separated aspect operands to partition by")
    p.set_defaults(func=cmd_build_matrix)

    p = sub.add_parser("validate-ci", help="Check reported CI against reconstruction")
    series_args(p, prices=False)
    output_args(p)
    p.add_argument("--tol", type=float, default=None, help="Tolerance in g CO2eq/kWh")
    p.set_defaults(func=cmd_validate_ci)

    for name, func, help_text in [
        ("run", cmd_run, "Dispatch scenarios and write all outputs"),
        ("compare", cmd_compare, "Yearly comparison across zones and scenarios"),
    ]:
        p = sub.add_parser(name, help=help_text)
        model_arg(p)
        series_args(p)
        output_args(p)
        p.add_argument(
            "--scenario", action="append",
            help=f"Scenario file or kind ({', '.join(SCENARIO_KINDS)}); repeatable, default all kinds",
        )
        p.add_argument("--rule", help="Threshold table for green-rule")
        p.add_argument("--econ", help="Econ key/value file")
        p.add_argument("--ci-source", choices=CI_SOURCES, default="auto")
        p.add_argument("--national", metavar="ZONE", help="Aggregate all zones into one series with this name")
        if name == "compare":
            p.add_argument("--report", help="Write a DOCX report to this path")
        p.set_defaults(func=func)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings.configure_logging("DEBUG" if args.verbose else None)

    try:
        return args.func(args)
    except NumericalError as e:
        logger.error("Numerical failure: %s", e)
        return EXIT_NUMERICAL
    except (InputError, OSError) as e:
        logger.error("Input error: %s", e)
        return EXIT_INPUT
