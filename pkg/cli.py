"""
Command-Line Interface

Subcommands:
    analyze             full pipeline, JSON report (stdout or --out)
    enumerate           analyze with exhaustive search
    sample              analyze with Metropolis-Hastings search
    simulate            write a synthetic trial CSV and its target JSON
    figure hypergeom    a0 factor grid for two untreated strata sizes
    figure diagnostics  per-model treated ratio vs untreated E-ratio scatter

Exit codes: 0 success, 2 configuration error, 3 data error, 4 cap exceeded,
1 anything else.
"""

import argparse
import dataclasses
import logging
import sys
from typing import Any, Dict, List, Optional

from config.settings import Settings
from generators.report_generator import ReportGenerator
from generators.trial_simulator import PRESETS, SimulationConfig, simulate_trial
from models.errors import AnalysisError, ConfigError
from models.inference import SearchMode
from parsers.trial_parser import write_dataset
from pipeline import AnalysisPipeline
from utils.helpers import configure_logging

logger = logging.getLogger(__name__)


def _add_analysis_flags(parser: argparse.ArgumentParser, search: bool = True) -> None:
    parser.add_argument("--data", required=True, help="trial CSV (id,T,E,R,H1..Hk)")
    parser.add_argument("--target", help="target individual: JSON file, '1,0,1' or 'H1=1,H2=0,E=1,R=1'")
    parser.add_argument("--targets", help="JSON list of target individuals (batch analysis)")
    parser.add_argument("--config", help="JSON settings file; flags win on conflict")
    parser.add_argument("--prior", choices=["uniform", "chen-chen"])
    if search:
        parser.add_argument("--search", choices=["enumerate", "mh"])
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--burn-in", type=int, dest="burn_in")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--chains", type=int)
    parser.add_argument("--workers", type=int, help="threads for enumeration chunks / chains")
    parser.add_argument("--estimator", choices=["posterior-mean", "mle"])
    parser.add_argument("--top", type=int, help="number of models in the report")
    parser.add_argument("--out", help="output path (JSON report, or figure data)")
    parser.add_argument("--xlsx", help="optional styled workbook")
    parser.add_argument("--log-level", dest="log_level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcrs",
        description="Covariate selection for the probability of causation from a randomized trial",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    _add_analysis_flags(commands.add_parser("analyze", help="select models and report RR / PC bound"))
    _add_analysis_flags(commands.add_parser("enumerate", help="analyze with exhaustive search"), search=False)
    _add_analysis_flags(commands.add_parser("sample", help="analyze with Metropolis-Hastings"), search=False)

    simulate = commands.add_parser("simulate", help="write a synthetic trial")
    source = simulate.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=sorted(PRESETS))
    source.add_argument("--config", help="JSON generator config")
    simulate.add_argument("--n", type=int)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--out", required=True, help="trial CSV to write")
    simulate.add_argument("--target-out", dest="target_out", help="target JSON to write")
    simulate.add_argument("--log-level", dest="log_level")

    figure = commands.add_parser("figure", help="emit figure data")
    figures = figure.add_subparsers(dest="figure", required=True)
    hypergeom = figures.add_parser("hypergeom", help="a0 factor over all (x00, x01)")
    hypergeom.add_argument("n00", type=int)
    hypergeom.add_argument("n01", type=int)
    hypergeom.add_argument("--out", required=True)
    hypergeom.add_argument("--log-level", dest="log_level")
    _add_analysis_flags(figures.add_parser("diagnostics", help="per-model sufficiency scatter"))

    return parser


def _overrides(args: argparse.Namespace, mode: Optional[str]) -> Dict[str, Any]:
    def get(name: str) -> Any:
        return getattr(args, name, None)

    return {
        'search': {
            'prior': get('prior'),
            'mode': mode or get('search'),
            'iterations': get('iterations'),
            'burn_in': get('burn_in'),
            'seed': get('seed'),
            'chains': get('chains'),
            'workers': get('workers'),
        },
        'report': {
            'estimator': get('estimator'),
            'top_m': get('top'),
            'output_path': get('out'),
            'xlsx_path': get('xlsx'),
        },
        'log_level': get('log_level'),
    }


def _settings(args: argparse.Namespace, mode: Optional[str] = None, config_path: Optional[str] = None) -> Settings:
    settings = Settings.load(config_path=config_path, overrides=_overrides(args, mode))
    configure_logging(settings.log_level)
    return settings


def cmd_analyze(args: argparse.Namespace, mode: Optional[str] = None) -> int:
    settings = _settings(args, mode, args.config)
    pipeline = AnalysisPipeline(settings)
    report = pipeline.run(args.data, target=args.target, targets_path=args.targets)
    text = pipeline.export(report)
    if text is not None:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    settings = Settings.load(overrides={'log_level': args.log_level})
    configure_logging(settings.log_level)
    if args.preset:
        config = PRESETS[args.preset]()
    else:
        config = SimulationConfig.from_file(args.config)
    if args.n is not None:
        config = dataclasses.replace(config, n=args.n)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    dataset = simulate_trial(config)
    write_dataset(dataset, args.out, args.target_out, settings)
    return 0


def cmd_figure_hypergeom(args: argparse.Namespace) -> int:
    settings = Settings.load(overrides={'log_level': args.log_level})
    configure_logging(settings.log_level)
    if args.n00 < 0 or args.n01 < 0:
        raise ConfigError(f"group sizes must be non-negative, got ({args.n00}, {args.n01})")
    ReportGenerator(settings).write_hypergeom(args.n00, args.n01, args.out)
    return 0


def cmd_figure_diagnostics(args: argparse.Namespace) -> int:
    settings = _settings(args, config_path=args.config)
    if args.targets:
        raise ConfigError("figure diagnostics takes a single --target")
    if not args.out:
        raise ConfigError("figure diagnostics needs --out")
    pipeline = AnalysisPipeline(settings)
    dataset = pipeline.load(args.data, target=args.target)[0]
    rows = pipeline.explore(dataset)
    pipeline.report_generator.write_diagnostics(rows, args.out)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "enumerate":
            return cmd_analyze(args, SearchMode.ENUMERATE.value)
        if args.command == "sample":
            return cmd_analyze(args, SearchMode.MH.value)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.figure == "hypergeom":
            return cmd_figure_hypergeom(args)
        return cmd_figure_diagnostics(args)
    except AnalysisError as e:
        logger.error(str(e))
        sys.stderr.write(f"error: {e}\n")
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure")
        sys.stderr.write(f"error: [analysis] {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
