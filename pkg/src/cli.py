"""
Command-line entry point: ``python -m src.cli <subcommand> ...``.

Subcommands: ingest, tessellate, train-diary, simulate, evaluate. Exit code
is 0 on success, 1 on usage errors and 2 on data errors.
"""

import argparse
import logging
import os
import sys
from datetime import datetime
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from dateutil import parser as date_parser

from config.model_config import ModelConfig
from src.diary.diary_generator import load_diary_generator, save_diary_generator, train_diary_generator
from src.engine.simulator import read_trajectories
from src.engine.social_graph import SocialGraph
from src.metrics.scores import DEFAULT_SCHEMES, write_score_report
from src.models.data_models import BinningScheme, Measure, ModelVariant
from src.models.exceptions import FormatError, MobilitySimError
from src.pipelines.evaluation_pipeline import evaluate
from src.pipelines.ingest_pipeline import run_ingest
from src.pipelines.simulation_pipeline import run_simulations
from src.tessellation.io import read_exclusion_list, read_tessellation, write_tessellation
from src.tessellation.relevance import (
    SYNTHETIC_BETA,
    SYNTHETIC_LAMBDA,
    assign_relevance,
    with_synthetic_relevance,
)
from src.tessellation.tessellation import build_squared_tessellation, exclude_locations, filter_relevant

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

LOG_FORMAT = "[%(asctime)s][%(levelname)s] %(name)s: %(message)s"


class UsageError(Exception):
    """Invalid command line."""


class ArgumentParser(argparse.ArgumentParser):
    """Parser that raises instead of exiting, so the caller picks the exit code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _timestamp(text: str) -> datetime:
    try:
        return date_parser.isoparse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid ISO-8601 timestamp '{text}'") from None


def _bbox(text: str):
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid bbox '{text}'") from None
    if len(values) != 4:
        raise argparse.ArgumentTypeError("bbox needs minlat,minlng,maxlat,maxlng")
    return values


def _on_off(text: str) -> bool:
    if text.lower() in ("on", "true", "1", "yes"):
        return True
    if text.lower() in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on or off, got '{text}'")


def _model(text: str) -> ModelVariant:
    try:
        return ModelVariant.parse(text)
    except FormatError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _labelled(text: str) -> tuple:
    label, sep, path = text.partition("=")
    if not sep or not label or not path:
        raise argparse.ArgumentTypeError(f"expected label=path, got '{text}'")
    return label, path


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Random seed")
    common.add_argument("--out", default=None, help="Output path or prefix")
    common.add_argument("--config", default=None, help="YAML configuration file")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = ArgumentParser(prog="mobsim", description="Socially informed mobility simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    ingest = sub.add_parser("ingest", parents=[common], help="Filter check-ins into trajectories")
    ingest.add_argument("--checkins", required=True)
    ingest.add_argument("--venues", required=True)
    ingest.add_argument("--graph", required=True)
    ingest.add_argument("--bbox", type=_bbox)
    ingest.add_argument("--start", type=_timestamp)
    ingest.add_argument("--end", type=_timestamp)

    tess = sub.add_parser("tessellate", parents=[common], help="Build a weighted squared tessellation")
    tess.add_argument("--bbox", type=_bbox, required=True)
    tess.add_argument("--side-m", type=float, required=True)
    source = tess.add_mutually_exclusive_group()
    source.add_argument("--points", help="Trajectory file whose points weight the tiles")
    source.add_argument("--synthetic-relevance", action="store_true")
    tess.add_argument("--beta", type=float, default=SYNTHETIC_BETA)
    tess.add_argument("--lam", type=float, default=SYNTHETIC_LAMBDA)
    tess.add_argument("--exclude", help="File with one excluded tile id per line")
    tess.add_argument("--relevant-only", action="store_true", help="Keep tiles with relevance >= 1")

    diary = sub.add_parser("train-diary", parents=[common], help="Train the mobility-diary generator")
    diary.add_argument("--traj", required=True)
    diary.add_argument("--tess", required=True)
    diary.add_argument("--slot-hours", type=float, default=1.0)

    sim = sub.add_parser("simulate", parents=[common], help="Generate synthetic trajectories")
    sim.add_argument("--model", type=_model)
    sim.add_argument("--tess", required=True)
    sim.add_argument("--graph", required=True, help="Edge list, or random:N:P")
    sim.add_argument("--diary")
    sim.add_argument("--start", type=_timestamp)
    sim.add_argument("--end", type=_timestamp)
    sim.add_argument("--runs", type=int, default=1)
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--rsl", type=_on_off)
    sim.add_argument("--speed-kmh", type=float)
    sim.add_argument("--degree-social", type=_on_off)
    sim.add_argument("--n-max", type=int)
    sim.add_argument("--n-agents", type=int)

    ev = sub.add_parser("evaluate", parents=[common], help="Score synthetic against real trajectories")
    ev.add_argument("--real", required=True)
    ev.add_argument("--synthetic", type=_labelled, action="append", required=True, help="label=path, repeatable")
    ev.add_argument("--measures", default=",".join(m.value for m in DEFAULT_SCHEMES))
    ev.add_argument("--bins", action="append", default=[], help="scheme, or measure=scheme; repeatable")
    ev.add_argument("--tess")
    ev.add_argument("--graph")
    ev.add_argument("--waiting-mode", default="all", choices=["all", "cut_lt_1h", "remap_lt_1h_to_1h"])
    return parser


def _load_config(args: argparse.Namespace) -> ModelConfig:
    config = ModelConfig.from_yaml(args.config) if args.config else ModelConfig()
    return config.updated(seed=args.seed)


def _require_out(args: argparse.Namespace) -> str:
    if not args.out:
        raise UsageError(f"{args.command}: --out is required")
    return args.out


def cmd_ingest(args: argparse.Namespace) -> None:
    window = None
    if args.start or args.end:
        if not (args.start and args.end):
            raise UsageError("ingest: --start and --end go together")
        window = (args.start, args.end)
    run_ingest(args.checkins, args.venues, args.graph, _require_out(args), window, args.bbox)


def cmd_tessellate(args: argparse.Namespace) -> None:
    out = _require_out(args)
    config = _load_config(args)
    tess = build_squared_tessellation(args.bbox, args.side_m)
    if args.exclude:
        tess = exclude_locations(tess, read_exclusion_list(args.exclude))
    if args.points:
        tess, _ = assign_relevance(tess, read_trajectories(args.points))
    elif args.synthetic_relevance:
        tess = with_synthetic_relevance(tess, np.random.default_rng(config.seed), args.beta, args.lam)
    if args.relevant_only:
        tess = filter_relevant(tess)
    write_tessellation(tess, out)


def cmd_train_diary(args: argparse.Namespace) -> None:
    tess = read_tessellation(args.tess)
    gen = train_diary_generator(read_trajectories(args.traj), tess, args.slot_hours)
    save_diary_generator(gen, _require_out(args))


def cmd_simulate(args: argparse.Namespace) -> None:
    out = _require_out(args)
    config = _load_config(args).updated(
        variant=args.model,
        start=args.start,
        end=args.end,
        rsl=args.rsl,
        reachable_speed_kmh=args.speed_kmh,
        degree_social_exploration=args.degree_social,
        n_max=args.n_max,
    )
    if config.variant.uses_diary and not args.diary:
        raise UsageError(f"simulate: model {config.variant.value} needs --diary")
    if args.runs < 1 or args.jobs == 0:
        raise UsageError("simulate: --runs must be >= 1 and --jobs non-zero")
    tess = read_tessellation(args.tess, min_relevance=config.min_relevance)
    graph = SocialGraph.parse(args.graph, seed=config.seed, n_nodes=args.n_agents)
    config = config.updated(n_agents=args.n_agents if args.n_agents is not None else len(graph))
    config.validate()
    diary_gen = load_diary_generator(args.diary) if config.variant.uses_diary else None
    run_simulations(config, tess, graph, out, diary_gen, args.runs, args.jobs)


def _parse_bins(specs: Sequence[str]) -> Dict[Measure, BinningScheme]:
    overrides: Dict[Measure, BinningScheme] = {}
    for spec in specs:
        name, sep, scheme_text = spec.partition("=")
        if sep:
            overrides[Measure.parse(name)] = BinningScheme.parse(scheme_text)
            continue
        scheme = BinningScheme.parse(spec)
        for measure, default in DEFAULT_SCHEMES.items():
            if default.kind == scheme.kind:
                overrides.setdefault(measure, BinningScheme(scheme.kind, scheme.n_bins, default.lo, default.hi))
    return overrides


def cmd_evaluate(args: argparse.Namespace) -> None:
    out = _require_out(args)
    config = _load_config(args)
    try:
        measures = [Measure.parse(name) for name in args.measures.split(",") if name.strip()]
        overrides = _parse_bins(args.bins)
    except FormatError as e:
        raise UsageError(f"evaluate: {e}") from None
    real = read_trajectories(args.real)
    synthetic: Dict[str, List[pd.DataFrame]] = {}
    for label, path in args.synthetic:
        synthetic.setdefault(label, []).append(read_trajectories(path))
    tess = read_tessellation(args.tess) if args.tess else None
    graph = SocialGraph.parse(args.graph, seed=config.seed) if args.graph else None
    result = evaluate(
        real,
        synthetic,
        measures,
        overrides,
        tess,
        graph,
        seed=config.seed,
        seeds=[config.seed],
        config_digest=config.digest(),
        waiting_mode=args.waiting_mode,
    )
    write_score_report(result.report, out)
    stem, _ = os.path.splitext(out)
    result.distributions.to_csv(f"{stem}_distributions.csv", index=False, float_format="%.10g")


COMMANDS = {
    "ingest": cmd_ingest,
    "tessellate": cmd_tessellate,
    "train-diary": cmd_train_diary,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
}


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(format=LOG_FORMAT)
    logging.getLogger().setLevel(args.log_level)
    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except (MobilitySimError, OSError) as e:
        print(f"{args.command}: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
