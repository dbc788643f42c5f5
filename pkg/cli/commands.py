"""
CLI Commands
============

Implementation of the `gen-data`, `train`, `prune`, `sweep` and `eval`
subcommands. Each command takes plain values (parsed by main.py), prints its
table to stdout and returns what it produced so it can be driven from tests.

Partitions are always re-derived from the data file and the top-level seed,
so train, prune, sweep and eval agree on which beats are held out.
"""

import logging
import pathlib
from collections.abc import Sequence

from core.exceptions import ConfigError
from data.models import (
    NUM_CLASSES,
    OptimizerConfig,
    OptimizerRule,
    Strategy,
    StrategyConfig,
    SweepReport,
    TrainConfig,
    TrainLog,
)
from services.dataset import BeatSet, load_beats, save_beats, smote_balance, stratified_split
from services.flops import flops_model, flops_total, layer_sparsity
from services.model_store import load_model, save_model
from services.model_zoo import Model, build_baseline
from services.pruning import apply_strategy
from services.reporting import metrics_table, sweep_table, write_figures, write_report, write_train_log
from services.synthetic import generate_synthetic
from services.training import EvaluationResult, evaluate, train
from tasks.sweep import cell_seed, sweep
from utilities.seeding import derive_seed

logger = logging.getLogger(__name__)


def parse_counts(text: str) -> list[int]:
    try:
        counts = [int(x) for x in text.split(",")]
    except ValueError as e:
        raise ConfigError(f"--counts must be {NUM_CLASSES} comma-separated integers: {e}") from e
    if len(counts) != NUM_CLASSES:
        raise ConfigError(f"--counts must list {NUM_CLASSES} values (N,S,V,F,Q), got {len(counts)}")
    return counts


def parse_strategies(text: str) -> list[Strategy]:
    try:
        return [Strategy(s.strip()) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise ConfigError(f"unknown strategy in {text!r}; expected simple, finetune or multistage") from e


def optimizer_config(rule: str = "adam", lr: float | None = None) -> OptimizerConfig:
    try:
        rule = OptimizerRule(rule)
    except ValueError as e:
        raise ConfigError(f"unknown optimizer {rule!r}") from e
    if lr is None:
        return OptimizerConfig(rule=rule)
    return OptimizerConfig(rule=rule, lr=lr)


def prepare_partitions(data: str | pathlib.Path, seed: int, smote: bool = True,
                       smote_k: int = 5) -> tuple[BeatSet, BeatSet, BeatSet]:
    """70/15/15 split of the beat-CSV at `data`, SMOTE applied to the training part only."""
    beats = load_beats(data)
    train_set, val_set, test_set = stratified_split(beats, seed=derive_seed(seed, "split"))
    before = {c.value: n for c, n in train_set.histogram.items()}
    if smote:
        train_set = smote_balance(train_set, k=smote_k, seed=derive_seed(seed, "smote"))
    after = {c.value: n for c, n in train_set.histogram.items()}
    logger.info(
        f"Training partition histogram before={before} after={after}",
        extra={"payload": {"before": before, "after": after, "smote": smote}},
    )
    return train_set, val_set, test_set


def _print_evaluation(title: str, result: EvaluationResult):
    print(title)
    print(metrics_table(result.per_class, result.overall))
    print(f"Loss: {result.loss:.6f}")


def cmd_gen_data(counts: Sequence[int], sigma: float, seed: int, out: str | pathlib.Path) -> pathlib.Path:
    beats = generate_synthetic(list(counts), seed=seed, sigma=sigma)
    path = save_beats(beats, out)
    print(f"Wrote {len(beats)} beats to {path}")
    return path


def cmd_train(
    data: str | pathlib.Path,
    out: str | pathlib.Path,
    seed: int,
    cfg: TrainConfig | None = None,
    smote: bool = True,
    smote_k: int = 5,
) -> tuple[Model, TrainLog, EvaluationResult]:
    cfg = cfg or TrainConfig()
    cfg = cfg.model_copy(update={"seed": derive_seed(seed, "train")})
    train_set, val_set, test_set = prepare_partitions(data, seed, smote, smote_k)

    model, log = train(build_baseline(seed), train_set, val_set, cfg)
    save_model(model, out)
    write_train_log(log, f"{out}.log.json")

    result = evaluate(model, test_set)
    _print_evaluation(f"Test set ({len(test_set)} beats)", result)
    return model, log, result


def cmd_prune(
    model_path: str | pathlib.Path,
    data: str | pathlib.Path,
    strategy: Strategy | str,
    sparsity: float,
    out: str | pathlib.Path,
    seed: int,
    base: StrategyConfig | None = None,
    smote: bool = True,
    smote_k: int = 5,
) -> tuple[Model, EvaluationResult]:
    """Prunes with one strategy, using the same per-cell seed a sweep would use for (strategy, sparsity)."""
    try:
        strategy = Strategy(strategy)
    except ValueError as e:
        raise ConfigError(f"unknown strategy {strategy!r}") from e
    if not 0.0 <= sparsity <= 1.0:
        raise ConfigError(f"--sparsity must lie in [0, 1], got {sparsity}")

    base = base or StrategyConfig()
    cfg = base.model_copy(update={"strategy": strategy, "sparsity": sparsity,
                                  "seed": cell_seed(seed, strategy, sparsity)})
    model = load_model(model_path)
    train_set, val_set, test_set = prepare_partitions(data, seed, smote, smote_k)

    pruned = apply_strategy(model, cfg, train_set, val_set)
    save_model(pruned, out)
    result = evaluate(pruned, test_set)

    _print_evaluation(f"{strategy.value} pruning at sparsity {sparsity:g}, test set ({len(test_set)} beats)", result)
    print(f"FLOPs: {flops_total(sparsity)}")
    print(f"FLOPs (realized model, exact count): {flops_model(pruned)['total']}")
    for layer, census in layer_sparsity(pruned).items():
        print(f"  {layer}: {census['zeros']}/{census['weights']} zeros ({census['sparsity'] * 100:.2f}%)")
    return pruned, result


def cmd_sweep(
    model_path: str | pathlib.Path,
    data: str | pathlib.Path,
    strategies: Sequence[Strategy],
    sparsities: Sequence[float],
    out: str | pathlib.Path,
    seed: int,
    base: StrategyConfig | None = None,
    figures: str | pathlib.Path | None = None,
    workers: int | None = None,
    smote: bool = True,
    smote_k: int = 5,
) -> SweepReport:
    base = (base or StrategyConfig()).model_copy(update={"seed": seed})
    model = load_model(model_path)
    train_set, val_set, test_set = prepare_partitions(data, seed, smote, smote_k)

    report = sweep(model, strategies, sparsities, train_set, val_set, test_set, base, workers)
    write_report(report, out)
    if figures:
        write_figures(report, figures)
    print(sweep_table(report))
    return report


def cmd_eval(
    model_path: str | pathlib.Path,
    data: str | pathlib.Path,
    seed: int,
    whole_file: bool = False,
) -> EvaluationResult:
    """Evaluates on the held-out test partition, or on every beat of the file with `whole_file`."""
    model = load_model(model_path)
    if whole_file:
        beats = load_beats(data)
        title = f"All beats ({len(beats)})"
    else:
        # SMOTE only touches the training partition; skip it
        _, _, beats = prepare_partitions(data, seed, smote=False)
        title = f"Test set ({len(beats)} beats)"
    result = evaluate(model, beats)
    _print_evaluation(title, result)
    return result
