# core/cli.py

import argparse
import json
import sys
from typing import List, Optional

from loguru import logger

from core.config import SETUPS, output_dir
from core.errors import NettingInfeasibleError, ScenarioValidationError, SeriesValidationError
from core.models import Resolution
from core.pipeline import compare_setups, run, stage_analyze, stage_disaggregate, stage_net
from core.scenario_io import load_scenario
from core.synth import FIGURE_CASES, synth_figure_case, synth_random

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3

STAGES = {
    "run": run,
    "disaggregate": stage_disaggregate,
    "net": stage_net,
    "analyze": stage_analyze,
    "compare": compare_setups,
}


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="Scenario manifest (JSON).")
    p.add_argument("--out", default=None, help="Output directory (default: $NETBAL_OUTPUT_DIR or data/results).")
    p.add_argument("--setup", choices=sorted(SETUPS), default=None, help="Ramping case x AC limits preset.")
    p.add_argument("--alpha", type=float, default=None, help="Weight of the flow smoothing term.")
    p.add_argument("--e-min", type=float, default=None, help="Accepted total TP energy error, MWh^2.")
    p.add_argument("--max-iter", type=int, default=None, help="Iteration cap of the TP energy correction.")
    p.add_argument("--window-tps", default=None, help="Netting window length in TPs, or 'full'.")
    p.add_argument("--zero-threshold", type=float, default=None, help="|need| at or below this counts as zero, MW.")
    p.add_argument("--bin-width", type=float, default=None, help="Histogram bin width, MW.")
    p.add_argument(
        "--use-trm",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Let netting use the TRM (--no-use-trm forces it off).",
    )
    p.add_argument("--workers", type=int, default=None, help="Processes used for disaggregation.")
    p.add_argument("--show-config", action="store_true", help="Print the effective configuration and exit.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netbal",
        description="High-resolution balancing need from TP energy simulations, with netting over AC lines.",
    )
    parser.add_argument("--log-level", default="INFO", help="loguru level for stderr (default INFO).")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("run", "Disaggregate, net and analyze in one go."),
        ("disaggregate", "HR_C/HR_V disaggregation with TP energy correction."),
        ("net", "Netting LP over the disaggregated scenario."),
        ("analyze", "Statistics, cause labels, histograms and ramp adequacy."),
        ("compare", "Run every setup S1..S4 and tabulate them side by side."),
    ):
        _add_pipeline_flags(sub.add_parser(name, help=text))

    synth = sub.add_parser("synth", help="Write a synthetic scenario.")
    synth.add_argument("--name", default="random", choices=("random",) + FIGURE_CASES)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--nodes", type=int, default=3)
    synth.add_argument("--tps", type=int, default=48)
    synth.add_argument("--tp-minutes", type=int, default=60)
    synth.add_argument("--step-minutes", type=int, default=1)
    synth.add_argument("--volatility", type=float, default=0.1)
    synth.add_argument("--out", default=None)
    return parser


def _configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper())


def _pipeline_command(args) -> int:
    scenario, network, cfg = load_scenario(args.manifest)
    if args.setup:
        cfg = cfg.with_setup(args.setup)
    cfg = cfg.with_overrides(
        alpha=args.alpha,
        e_min=args.e_min,
        max_iterations=args.max_iter,
        window_tps=args.window_tps,
        zero_threshold=args.zero_threshold,
        bin_width=args.bin_width,
        use_trm=args.use_trm,
        workers=args.workers,
    )

    if args.show_config:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return EXIT_OK

    out = output_dir(args.out)
    STAGES[args.command](scenario, network, cfg, out)
    logger.info("{} finished, results in {}", args.command, out)
    return EXIT_OK


def _synth_command(args) -> int:
    out = output_dir(args.out)
    res = Resolution(args.tp_minutes, args.step_minutes)
    if args.name == "random":
        path = synth_random(args.seed, args.nodes, args.tps, res, out, volatility=args.volatility)
    else:
        path = synth_figure_case(args.name, out, res)
    print(path)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)

    try:
        if args.command == "synth":
            return _synth_command(args)
        return _pipeline_command(args)
    except NettingInfeasibleError as exc:
        logger.error("netting infeasible: {}", exc)
        return EXIT_INFEASIBLE
    except (ScenarioValidationError, SeriesValidationError, ValueError, OSError) as exc:
        logger.error("invalid input: {}", exc)
        return EXIT_VALIDATION
