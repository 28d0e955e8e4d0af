"""
Command-line entry point for thermal geo-localization
"""

import argparse
import copy
import logging
import os
import sys
from typing import List, Optional, Sequence

from . import __version__
from .core import GeoLocalizationPipeline
from .evalkit import report_table
from .exceptions import ConfigError, StageError
from .models.config import DannMode, ExperimentConfig
from .utils import load_experiment_config, setup_logging

DEFAULT_CONFIG = ".env"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_INTERRUPTED = 130


def _common_options() -> argparse.ArgumentParser:
    """Flags shared by every subcommand; they override the config file"""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--config", type=str, help=f"Path to the .env file (default: {DEFAULT_CONFIG})"
    )
    parser.add_argument("--work-dir", type=str, help="Directory holding all artifacts")
    parser.add_argument("--seed", type=int, help="Seed for every random stream")
    parser.add_argument(
        "--ce",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Contrast-enhance thermal images",
    )
    parser.add_argument("--ce-factor", type=float, help="Contrast enhancement factor")
    parser.add_argument(
        "--dann",
        choices=["off", "full", "only-positive"],
        help="Domain-adversarial loss mode",
    )
    parser.add_argument(
        "--generated",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Mix generated thermal crops into SGM training",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="thermal-geoloc",
        description="Satellite-thermal geo-localization: train, index and evaluate",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  thermal-geoloc run                              Baseline cell on a synthetic world
  thermal-geoloc run --ce --dann only-positive --generated
  thermal-geoloc run --ce --generated --lambda1 10 100
  thermal-geoloc query --tile-id 42 --k 5 --radius 512
  thermal-geoloc evaluate --config experiment.env
        """,
    )
    parser.add_argument(
        "--version", action="version", version=f"thermal-geoloc {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text)

    add("synthmap", "Generate a synthetic satellite/thermal map pair")
    add("tile", "Tile, pair and split the maps")
    for name, help_text in (
        ("train-tgm", "Train the satellite-to-thermal generator"),
        ("generate", "Generate thermal crops for the unpaired satellite tiles"),
    ):
        add(name, help_text).add_argument("--lambda1", type=float, help="L1 weight")
    add("train-sgm", "Train the geo-localization embedding").add_argument(
        "--lambda1", type=float, help="L1 weight of the generator to mix in"
    )
    add("build-index", "Embed the evaluation split's satellite tiles")

    query = add("query", "Retrieve the closest satellite tiles for one thermal image")
    target = query.add_mutually_exclusive_group(required=True)
    target.add_argument("--tile-id", type=int, help="Evaluation-split thermal crop")
    target.add_argument("--image", type=str, help="Thermal image file")
    query.add_argument("--k", type=int, default=5, help="Neighbours to return")
    query.add_argument("--radius", type=float, help="Prior search radius in meters")
    query.add_argument(
        "--center", type=float, nargs=2, metavar=("X", "Y"), help="Prior center (m)"
    )

    add("evaluate", "Compute recall, prior recall and error metrics")

    histogram = add("histogram", "Bin the per-query errors of the last evaluation")
    histogram.add_argument("--edges", type=float, nargs="+", help="Bin edges in meters")
    histogram.add_argument("--no-plot", action="store_true", help="Skip the PNG plot")

    run = add("run", "Run every stage of one ablation cell, reusing artifacts")
    run.add_argument("--force", action="store_true", help="Re-run every stage")
    run.add_argument(
        "--lambda1", type=float, nargs="+", help="One or more L1 weights to sweep"
    )
    return parser


def apply_overrides(
    config: ExperimentConfig, args: argparse.Namespace
) -> ExperimentConfig:
    """Layer command-line flags over the loaded configuration"""
    if args.work_dir:
        config.paths.work_dir = args.work_dir
    if args.seed is not None:
        config.seed = config.tgm.seed = config.sgm.seed = args.seed
    if args.ce_factor is not None:
        config.ce.factor = args.ce_factor
    lambda1 = getattr(args, "lambda1", None)
    if isinstance(lambda1, list):
        lambda1 = lambda1[0] if len(lambda1) == 1 else None
    config.apply_ablation(
        ce=args.ce,
        dann_mode=DannMode.parse(args.dann) if args.dann else None,
        use_generated=args.generated,
        lambda1=lambda1,
    )
    config.validate()
    return config


def _config_path(args: argparse.Namespace) -> Optional[str]:
    if args.config:
        return args.config
    return DEFAULT_CONFIG if os.path.exists(DEFAULT_CONFIG) else None


def _run(args: argparse.Namespace, config: ExperimentConfig) -> None:
    sweep: List[float] = args.lambda1 if args.lambda1 and len(args.lambda1) > 1 else []
    if not sweep:
        GeoLocalizationPipeline(config, force=args.force).run()
        return

    reports = []
    for lambda1 in sweep:
        cell = copy.deepcopy(config).apply_ablation(lambda1=lambda1)
        print(f"🔁 lambda1 = {lambda1:g} ({cell.cell_name})")
        reports.append(GeoLocalizationPipeline(cell, force=args.force).run())
    GeoLocalizationPipeline(config).console.print(
        report_table(reports, title="Generator weight sweep")
    )


def dispatch(args: argparse.Namespace, config: ExperimentConfig) -> None:
    """Run the selected subcommand"""
    if args.command == "run":
        _run(args, config)
        return

    pipeline = GeoLocalizationPipeline(config)
    if args.command == "synthmap":
        pipeline.synthmap()
    elif args.command == "tile":
        pipeline.tile()
    elif args.command == "train-tgm":
        pipeline.train_tgm()
    elif args.command == "generate":
        pipeline.generate()
    elif args.command == "train-sgm":
        pipeline.train_sgm()
    elif args.command == "build-index":
        pipeline.build_index()
    elif args.command == "query":
        pipeline.query(
            tile_id=args.tile_id,
            image_path=args.image,
            k=args.k,
            center=tuple(args.center) if args.center else None,
            radius_m=args.radius,
        )
    elif args.command == "evaluate":
        pipeline.evaluate()
    elif args.command == "histogram":
        pipeline.histogram(edges=args.edges, plot=not args.no_plot)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)

    config_path = _config_path(args)
    if args.config and not os.path.exists(args.config):
        print(f"❌ Configuration file {args.config} not found")
        print(f"💡 Create {args.config} based on config.env.example")
        print(f"   cp config.env.example {args.config}")
        return EXIT_CONFIG

    try:
        config = apply_overrides(load_experiment_config(config_path), args)
        setup_logging(config.log_level, verbose=args.verbose)

        print(f"🚀 thermal-geoloc {__version__}: {args.command}")
        print(f"📁 Configuration: {config_path or 'defaults + environment'}")
        print(f"🧪 Cell: {config.cell_name} (work dir {config.paths.work_dir})")
        logging.debug(f"Config fingerprint {config.fingerprint}")

        dispatch(args, config)

    except KeyboardInterrupt:
        print("\n🛑 Interrupted")
        return EXIT_INTERRUPTED
    except ConfigError as e:
        print(f"❌ Configuration error: {e}")
        return EXIT_CONFIG
    except StageError as e:
        print(f"❌ {e}")
        print(f"💡 Artifacts written so far are kept under {config.paths.work_dir}")
        if args.verbose:
            import traceback

            traceback.print_exc()
        return e.exit_code
    except Exception as e:
        print(f"❌ Unexpected error: {e}")
        if args.verbose:
            import traceback

            traceback.print_exc()
        return EXIT_UNEXPECTED

    print("✅ Done")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
