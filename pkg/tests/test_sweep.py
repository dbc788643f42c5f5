import numpy as np
import pytest

from core.exceptions import ConfigError
from data.models import Strategy, StrategyConfig
from services.dataset import stratified_split
from services.flops import flops_total
from services.synthetic import generate_synthetic
from services.training import evaluate
from tasks import sweep as sweep_task
from tasks.sweep import cell_seed, sweep

BASE = StrategyConfig(finetune_epochs=1, batch_size=16, patience=0, seed=5)


@pytest.fixture
def report(baseline, partitions):
    train_set, val_set, test_set = partitions
    return sweep(baseline, list(Strategy), [0.5, 0.0], train_set, val_set, test_set, BASE, max_workers=2)


def test_one_row_per_cell_in_order(report):
    assert [(r.strategy, r.eta) for r in report.rows] == [
        (s, eta) for s in Strategy for eta in (0.0, 0.5)
    ]
    assert all(r.error is None for r in report.rows)
    assert [r.flops for r in report.rows] == [flops_total(r.eta) for r in report.rows]


def test_zero_sparsity_rows_equal_baseline(report, baseline, partitions):
    reference = evaluate(baseline, partitions[2])
    for row in report.rows:
        if row.eta == 0.0:
            assert row.accuracy == reference.accuracy
            assert row.loss == reference.loss
    assert report.baseline["overall"]["accuracy"] == reference.accuracy


def test_metadata(report):
    assert report.metadata.seed == BASE.seed
    assert report.metadata.strategies == list(Strategy)
    assert report.metadata.sparsities == [0.5, 0.0]
    assert len(report.metadata.config_hash) == 16


def test_sweep_is_deterministic(report, baseline, partitions):
    train_set, val_set, test_set = partitions
    again = sweep(baseline, list(Strategy), [0.5, 0.0], train_set, val_set, test_set, BASE, max_workers=3)
    assert again.rows == report.rows


def test_failed_cell_is_recorded(baseline, partitions, monkeypatch):
    train_set, val_set, test_set = partitions
    real = sweep_task.apply_strategy

    def flaky(model, cfg, *args):
        if cfg.strategy == Strategy.MULTISTAGE:
            raise RuntimeError("boom")
        return real(model, cfg, *args)

    monkeypatch.setattr(sweep_task, "apply_strategy", flaky)
    report = sweep(baseline, [Strategy.SIMPLE, Strategy.MULTISTAGE], [0.3], train_set, val_set, test_set, BASE)
    failed = [r for r in report.rows if r.error]
    assert len(failed) == 1
    assert failed[0].strategy == Strategy.MULTISTAGE
    assert "boom" in failed[0].error
    assert failed[0].accuracy is None
    assert failed[0].flops == flops_total(0.3)


def test_cell_seeds_differ():
    seeds = {cell_seed(7, s, eta) for s in Strategy for eta in np.round(np.arange(0.1, 1.0, 0.1), 1)}
    assert len(seeds) == 27
    assert cell_seed(7, Strategy.SIMPLE, 0.3) == cell_seed(7, Strategy.SIMPLE, 0.1 + 0.2)


def test_bad_sparsity(baseline, partitions):
    with pytest.raises(ConfigError):
        sweep(baseline, [Strategy.SIMPLE], [1.5], *partitions, BASE)


def test_split_warnings_reach_metadata(baseline):
    beats = generate_synthetic([20, 2, 20, 20, 20], seed=0)
    train_set, val_set, test_set = stratified_split(beats, seed=1)
    report = sweep(baseline, [Strategy.SIMPLE], [0.5], train_set, val_set, test_set, BASE, max_workers=1)
    assert report.metadata.warnings == ["class S has 2 records for 3 partitions"]
