"""
ECG Pruning Lab Entry Point
===========================

Command-line entry point. Parses the subcommand flags, sets up logging and
maps failures to exit codes:

  0  success
  1  unexpected error
  2  usage error (bad flags, unknown strategy, bad sparsity grid)
  3  data or file error (beat-CSV, model file, I/O)
  4  numeric failure (non-finite loss, shape mismatch)
"""

import argparse
import logging
import sys

from cli.commands import (
    cmd_eval,
    cmd_gen_data,
    cmd_prune,
    cmd_sweep,
    cmd_train,
    optimizer_config,
    parse_counts,
    parse_strategies,
)
from core.config import settings
from core.exceptions import PruneLabError
from core.logging import setup_logging
from data.models import StrategyConfig, TrainConfig
from services.reporting import parse_sparsities

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def _add_data_args(parser: argparse.ArgumentParser):
    parser.add_argument("--data", required=True, help="Beat-CSV file (label,s1..s260 per line)")
    parser.add_argument("--no-smote", dest="smote", action="store_false", help="Do not balance the training split")
    parser.add_argument("--smote-k", type=int, default=5, help="SMOTE neighbour count")


def _add_optimizer_args(parser: argparse.ArgumentParser, epochs: int, epochs_flag: str):
    parser.add_argument(epochs_flag, dest="epochs", type=int, default=epochs)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--patience", type=int, default=5, help="Early-stopping patience, 0 disables")
    parser.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    parser.add_argument("--lr", type=float, default=None, help="Learning rate (default 1e-3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecg-prune", description="ECG 1D-CNN pruning lab")
    parser.add_argument("--seed", type=int, default=settings.seed, help="Top-level seed (env ECGPRUNE_SEED)")
    parser.add_argument("--log-level", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="Write a synthetic beat-CSV")
    gen.add_argument("--counts", default="400,400,400,400,400", help="N,S,V,F,Q counts")
    gen.add_argument("--sigma", type=float, default=0.05, help="Noise and per-beat morphology jitter level")
    gen.add_argument("--out", required=True)

    tr = sub.add_parser("train", help="Train the baseline network")
    _add_data_args(tr)
    _add_optimizer_args(tr, epochs=50, epochs_flag="--epochs")
    tr.add_argument("--out", required=True, help="Model file to write")

    pr = sub.add_parser("prune", help="Prune a trained model with one strategy")
    pr.add_argument("--model", required=True)
    _add_data_args(pr)
    _add_optimizer_args(pr, epochs=10, epochs_flag="--finetune-epochs")
    pr.add_argument("--strategy", required=True)
    pr.add_argument("--sparsity", type=float, required=True)
    pr.add_argument("--out", required=True)

    sw = sub.add_parser("sweep", help="Run a strategy x sparsity sweep")
    sw.add_argument("--model", required=True)
    _add_data_args(sw)
    _add_optimizer_args(sw, epochs=10, epochs_flag="--finetune-epochs")
    sw.add_argument("--strategies", default="simple,finetune,multistage")
    sw.add_argument("--sparsities", default=settings.default_sparsities, help="start:stop:step or comma list")
    sw.add_argument("--out", required=True, help="Report base path; .csv and .json are written")
    sw.add_argument("--figures", default=None, help="Directory for per-figure JSON extracts")
    sw.add_argument("--workers", type=int, default=None)

    ev = sub.add_parser("eval", help="Print the metrics table of a model")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--all", dest="whole_file", action="store_true", help="Evaluate every beat, not the test split")
    return parser


def _strategy_config(args) -> StrategyConfig:
    return StrategyConfig(
        finetune_epochs=args.epochs, batch_size=args.batch_size, patience=args.patience,
        seed=args.seed, optimizer=optimizer_config(args.optimizer, args.lr),
    )


def run(args: argparse.Namespace):
    if args.command == "gen-data":
        cmd_gen_data(parse_counts(args.counts), args.sigma, args.seed, args.out)
    elif args.command == "train":
        cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, patience=args.patience,
                          optimizer=optimizer_config(args.optimizer, args.lr))
        cmd_train(args.data, args.out, args.seed, cfg, args.smote, args.smote_k)
    elif args.command == "prune":
        cmd_prune(args.model, args.data, args.strategy, args.sparsity, args.out, args.seed,
                  _strategy_config(args), args.smote, args.smote_k)
    elif args.command == "sweep":
        cmd_sweep(
            args.model, args.data, parse_strategies(args.strategies), parse_sparsities(args.sparsities),
            args.out, args.seed, _strategy_config(args), args.figures, args.workers, args.smote, args.smote_k,
        )
    elif args.command == "eval":
        cmd_eval(args.model, args.data, args.seed, args.whole_file)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        run(args)
    except PruneLabError as e:
        logger.error(f"{type(e).__name__} ({e.context}): {e.message}")
        return e.exit_code
    except ValueError as e:
        # pydantic validation of flag values (negative epochs, ...)
        logger.error(f"Invalid arguments: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"File error: {e}")
        return EXIT_DATA
    except Exception:
        logger.exception("Unexpected failure")
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
