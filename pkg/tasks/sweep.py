"""
Sparsity Sweep
==============

Runs every (strategy, eta) cell of a sweep against a trained baseline and
collects the test-set figures into a SweepReport. Cells are independent: each
works on its own model copy with a seed derived from (seed, strategy, eta), so
they can be spread over a thread pool and still produce the same report.
"""

import concurrent.futures
import logging
from collections.abc import Sequence

from core.config import settings
from core.exceptions import ConfigError
from data.models import ReportMetadata, Strategy, StrategyConfig, SweepReport, SweepRow
from services.dataset import BeatSet
from services.flops import flops_total
from services.model_zoo import Model
from services.pruning import apply_strategy
from services.reporting import config_hash
from services.training import evaluate
from utilities.seeding import derive_seed

logger = logging.getLogger(__name__)


def cell_seed(seed: int, strategy: Strategy, eta: float) -> int:
    return derive_seed(seed, strategy.value, float(eta))


def run_cell(
    model: Model, strategy: Strategy, eta: float, base: StrategyConfig,
    train_set: BeatSet, val_set: BeatSet, test_set: BeatSet,
) -> SweepRow:
    """Prunes a private copy of `model` with one strategy at one sparsity and scores it on `test_set`."""
    cfg = base.model_copy(update={"strategy": strategy, "sparsity": eta, "seed": cell_seed(base.seed, strategy, eta)})
    pruned = apply_strategy(model, cfg, train_set, val_set)
    result = evaluate(pruned, test_set)
    overall = result.overall
    return SweepRow(
        strategy=strategy, eta=eta,
        accuracy=overall.accuracy, sensitivity=overall.sensitivity, precision=overall.precision, f1=overall.f1,
        loss=result.loss, flops=flops_total(eta),
    )


def sweep(
    model: Model,
    strategies: Sequence[Strategy],
    sparsities: Sequence[float],
    train_set: BeatSet,
    val_set: BeatSet,
    test_set: BeatSet,
    base: StrategyConfig | None = None,
    max_workers: int | None = None,
) -> SweepReport:
    """
    One row per (strategy, eta), sorted by strategy then eta.

    A failing cell does not abort the sweep; its row carries the error message
    and no metrics.
    """
    base = base or StrategyConfig()
    strategies = [Strategy(s) for s in strategies]
    sparsities = [float(eta) for eta in sparsities]
    bad = [eta for eta in sparsities if not 0.0 <= eta <= 1.0]
    if bad:
        raise ConfigError(f"sparsities must lie in [0, 1], got {bad}")
    workers = max_workers or settings.sweep_workers

    baseline = evaluate(model, test_set)
    rows: list[SweepRow] = []
    cells = [(s, eta) for s in strategies for eta in sparsities]
    logger.info(f"Starting sweep of {len(cells)} cells on {workers} workers")

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_cell = {
            executor.submit(run_cell, model, s, eta, base, train_set, val_set, test_set): (s, eta)
            for s, eta in cells
        }
        for future in concurrent.futures.as_completed(future_to_cell):
            strategy, eta = future_to_cell[future]
            try:
                row = future.result()
                logger.info(
                    f"Cell {strategy.value} eta={eta} finished: accuracy={row.accuracy:.4f}",
                    extra={"payload": row.model_dump(mode="json")},
                )
            except Exception as exc:
                logger.error(f"Cell {strategy.value} eta={eta} failed: {exc}")
                row = SweepRow(strategy=strategy, eta=eta, flops=flops_total(eta), error=f"{type(exc).__name__}: {exc}")
            rows.append(row)

    metadata = ReportMetadata(
        seed=base.seed,
        config_hash=config_hash({
            "base": base.model_dump(mode="json"),
            "strategies": [s.value for s in strategies],
            "sparsities": sparsities,
        }),
        artifact_version=settings.artifact_version,
        strategies=strategies,
        sparsities=sparsities,
        warnings=list(dict.fromkeys([*train_set.warnings, *val_set.warnings, *test_set.warnings])),
    )
    return SweepReport(metadata=metadata, baseline=baseline.to_dict(), rows=rows)
