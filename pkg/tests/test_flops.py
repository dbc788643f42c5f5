import numpy as np
import pytest

from core.exceptions import FlopsError
from services.flops import (
    EXACT_MODE,
    flops_layer,
    flops_model,
    flops_reduction,
    flops_total,
    layer_sparsity,
)
from services.pruning import simple_prune


def test_table_layers_at_zero():
    assert flops_layer(1, 0.0) == 908800
    assert flops_layer(2, 0.0) == 9088
    assert flops_layer(3, 0.0) == 0
    assert flops_layer(4, 0.0) == 8064
    assert flops_layer(5, 0.0) == 576
    assert flops_layer(7, 0.0) == 576
    assert flops_layer(9, 0.0) == 8192
    assert flops_layer(10, 0.0) == 1280


def test_table_totals():
    assert flops_total(0.0) == 936576
    assert flops_total(0.6) == 386112
    assert flops_total(1.0) == 19136


def test_total_is_affine_in_sparsity():
    etas = [round(0.1 * i, 1) for i in range(1, 10)]
    totals = [flops_total(eta) for eta in etas]
    for eta, total in zip(etas, totals):
        assert total == pytest.approx(917440 * (1 - eta) + 19136, abs=0.5)
    assert all(a > b for a, b in zip(totals, totals[1:]))


def test_rounding_of_scaled_layers():
    assert flops_layer(1, 0.6) == 363520
    assert flops_layer(4, 0.6) == round(8064 * 0.4)


def test_reduction():
    assert flops_reduction(0.0) == 0.0
    assert flops_reduction(0.6) == pytest.approx(1 - 386112 / 936576)


def test_invalid_arguments():
    with pytest.raises(FlopsError):
        flops_layer(0, 0.5)
    with pytest.raises(FlopsError):
        flops_layer(11, 0.5)
    with pytest.raises(FlopsError):
        flops_total(1.5)
    with pytest.raises(FlopsError):
        flops_layer(1, 0.5, mode="bogus")


def test_exact_mode_counts_every_channel():
    assert flops_layer(4, 0.0, EXACT_MODE) == 18 * 7 * 128 * 32 * 2
    assert flops_layer(7, 0.0, EXACT_MODE) == 9 * 32 * 32 * 2 + 32
    assert flops_total(0.0, EXACT_MODE) > flops_total(0.0)


def test_realized_model_matches_exact_mode(baseline):
    assert flops_model(baseline)["total"] == flops_total(0.0, EXACT_MODE)
    pruned = simple_prune(baseline, 0.5)
    assert flops_model(pruned)["total"] == flops_total(0.5, EXACT_MODE)


def test_layer_sparsity(baseline):
    census = layer_sparsity(simple_prune(baseline, 0.6))
    assert census["conv1"]["zeros"] == 3840
    assert census["conv2"]["zeros"] == 17203
    assert census["conv3"]["zeros"] == 5529
    assert census["conv1"]["sparsity"] == pytest.approx(0.6)


def test_layer_sum_matches_total_on_dense_grid():
    # three scaled layers, each rounded on its own
    for eta in np.linspace(0.0, 1.0, 1001):
        eta = float(eta)
        layers = sum(flops_layer(i, eta) for i in range(1, 11))
        assert abs(layers - flops_total(eta)) <= 3
