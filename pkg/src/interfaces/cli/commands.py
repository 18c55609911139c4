"""
Command-line surface: `run`, `estimate` and `train`.

Every command returns a process exit code: 0 on success, 1 for runtime
failures and 2 for usage errors. Estimates go to stdout as JSON; human
summaries and error documents go to stderr.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from ...application.services.estimate_service import (
    CONE_ALIASES,
    EpsilonSetup,
    estimate_epsilon,
    estimate_rho,
    estimate_width,
)
from ...application.services.experiment_config import ExperimentConfig, ExperimentName, SideInfoParams
from ...application.services.experiment_service import ExperimentResult, ExperimentService
from ...application.services.training_service import (
    default_network,
    normalized_gaussian_matrix,
    synthetic_dataset,
    train,
)
from ...domain.ports.image_source_port import ImageSourcePort
from ...domain.value_objects.solver_config import StepPolicy
from ...infrastructure.adapters.pgm_image_source import PgmImageSource, SyntheticImageSource
from ...infrastructure.external.polars_csv_exporter import PolarsCsvExporter, read_document
from ...shared.config.settings import get_settings
from ...shared.exceptions import EXIT_RUNTIME_FAILURE, EXIT_USAGE_ERROR, ApplicationException
from ...shared.logging_config import configure_logging
from ...shared.trial_runner import derive_seed
from .mappers import NetworkMapper
from .overrides import apply_overrides
from .schemas import EstimateDocument, TrainConfig

logger = logging.getLogger(__name__)

console = Console(stderr=True)

CHECKPOINT_FILE = "checkpoint.json"
LOSS_HISTORY_FILE = "loss_history.csv"


def image_source_for(params: SideInfoParams) -> ImageSourcePort:
    """PGM file when a path is configured, the seeded synthetic image otherwise."""
    if params.image_path:
        return PgmImageSource(Path(params.image_path))
    return SyntheticImageSource(size=params.image_size, seed=params.image_seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipgd-lab",
        description="Inexact projected gradient descent: experiments, estimators and unrolled networks.",
    )
    parser.add_argument("--log-level", default=None, help="Overrides IPGD_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a named experiment and write CSV tables plus a manifest")
    run.add_argument("experiment", choices=[name.value for name in ExperimentName])
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", type=Path, default=None, help="Output directory")
    run.add_argument("--config", type=Path, default=None, help="JSON experiment document")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
                     help="Override a config field by dotted path, e.g. tree.k=8")

    estimate = commands.add_parser("estimate", help="Print one width, rate or model-error estimate as JSON")
    estimate.add_argument("kind", choices=["width", "rho", "epsilon"])
    estimate.add_argument("--set", dest="set_name", choices=sorted(CONE_ALIASES), default="sparse-diff")
    estimate.add_argument("--d", type=int, default=128)
    estimate.add_argument("--k", type=int, default=4)
    estimate.add_argument("--m", type=int, default=None, help="Measurements for rho (default d/2)")
    estimate.add_argument("--samples", type=int, default=10000)
    estimate.add_argument("--seed", type=int, default=0)
    method = estimate.add_mutually_exclusive_group()
    method.add_argument("--brute-force", dest="brute_force", action="store_true", default=True)
    method.add_argument("--alternating", dest="brute_force", action="store_false")
    estimate.add_argument("--restarts", type=int, default=20)
    estimate.add_argument("--mu", type=float, default=None, help="Step size for rho (default 1/||M||^2)")
    estimate.add_argument("--levels", type=int, default=None, help="Level truncation for rho_p or epsilon")
    estimate.add_argument("--setup", choices=[setup.value for setup in EpsilonSetup], default="side-info")
    estimate.add_argument("--image", type=Path, default=None, help="PGM image for the side-info setup")

    training = commands.add_parser("train", help="Train one unrolled network on synthetic sparse codes")
    training.add_argument("--config", type=Path, default=None, help="JSON training document")
    training.add_argument("--out", type=Path, default=None)
    training.add_argument("--seed", type=int, default=0)
    training.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE")
    return parser


def run_command(args: argparse.Namespace) -> int:
    document = read_document(args.config) if args.config else {}
    document["name"] = args.experiment
    if args.seed is not None:
        document["seed"] = args.seed
    config = ExperimentConfig.model_validate(apply_overrides(document, args.overrides))

    service = ExperimentService(PolarsCsvExporter(), image_source_factory=image_source_for)
    result = service.run(config, args.out)
    _print_result(result)
    return 0


def estimate_command(args: argparse.Namespace) -> int:
    if args.kind == "width":
        document = estimate_width(args.set_name, args.d, args.k, args.samples, args.seed)
    elif args.kind == "rho":
        document = estimate_rho(
            args.set_name,
            args.d,
            args.k,
            args.m or max(1, args.d // 2),
            args.seed,
            brute_force=args.brute_force,
            step_size=args.mu,
            step_policy=StepPolicy.AGGRESSIVE,
            restarts=args.restarts,
            truncation_levels=args.levels,
        )
    else:
        image = PgmImageSource(args.image) if args.image else SyntheticImageSource(seed=args.seed)
        extra = {} if args.levels is None else {"truncation_levels": args.levels}
        document = estimate_epsilon(EpsilonSetup(args.setup), args.seed, image_source=image, **extra)

    estimate = EstimateDocument.model_validate(document)
    print(json.dumps(estimate.model_dump(mode="json"), indent=2, sort_keys=True))
    return 0


def train_command(args: argparse.Namespace) -> int:
    document = read_document(args.config) if args.config else {}
    config = TrainConfig.model_validate(apply_overrides(document, args.overrides))
    output_dir = Path(args.out or get_settings().OUTPUT_ROOT_DIR / "train")

    M = normalized_gaussian_matrix(config.m, config.d, derive_seed(args.seed, 0))
    dataset, _ = synthetic_dataset(M, config.train_samples, config.k, config.lam,
                                   derive_seed(args.seed, 1), config.reference_iterations)
    result = train(default_network(M, config.layers, config.lam), dataset,
                   config.training.to_training_config(derive_seed(args.seed, 3)))

    exporter = PolarsCsvExporter()
    checkpoint = NetworkMapper.entity_to_checkpoint(result.network)
    exporter.export_document(checkpoint.model_dump(mode="json", by_alias=True), output_dir / CHECKPOINT_FILE)
    exporter.export_rows(result.history, output_dir / LOSS_HISTORY_FILE, ["epoch", "train_loss", "val_loss", "lr"])

    table = Table(title="train")
    for column in ("best epoch", "val loss", "lambda", "output"):
        table.add_column(column)
    best = result.history[result.best_epoch]
    table.add_row(str(result.best_epoch), f"{best['val_loss']:.6g}", f"{result.network.lam:.6g}", str(output_dir))
    console.print(table)
    return 0


def _print_result(result: ExperimentResult) -> None:
    table = Table(title=f"{result.name} -> {result.output_dir}")
    table.add_column("key")
    table.add_column("value")
    for key, value in result.summary.items():
        if isinstance(value, dict):
            value = ", ".join(f"{name}={_format(item)}" for name, item in value.items())
        table.add_row(key, _format(value))
    console.print(table)
    console.print(f"{len(result.files)} files written")


def _format(value) -> str:
    return f"{value:.6g}" if isinstance(value, float) else str(value)


COMMANDS = {"run": run_command, "estimate": estimate_command, "train": train_command}


def dispatch(argv: Optional[List[str]] = None) -> int:
    """Parse `argv` and run the command, mapping failures to exit codes."""
    args = build_parser().parse_args(argv)
    configure_logging(level=args.log_level)
    try:
        return COMMANDS[args.command](args)
    except ApplicationException as e:
        logger.error(f"{args.command} failed: {e.message}")
        print(json.dumps(e.to_dict(), default=str), file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid {args.command} document: {e.error_count()} errors")
        print(json.dumps({"error": True, "error_code": "VALIDATION_ERROR", "message": str(e)}), file=sys.stderr)
        return EXIT_USAGE_ERROR
    except Exception as e:
        logger.error(f"{args.command} failed: {str(e)}", exc_info=True)
        print(json.dumps({"error": True, "error_code": "INTERNAL_ERROR", "message": str(e)}), file=sys.stderr)
        return EXIT_RUNTIME_FAILURE
