import numpy as np

from data.models import OptimizerConfig, OptimizerRule
from utilities.optim import OptimizerState, optimizer_step, param_group


def _setup(rng):
    params = {"conv1.weight": rng.normal(size=(4, 1, 3)), "conv1.bias": rng.normal(size=4),
              "dense1.weight": rng.normal(size=(2, 4)), "dense1.bias": rng.normal(size=2)}
    grads = {k: rng.normal(size=v.shape) for k, v in params.items()}
    return params, grads


def test_param_group():
    assert param_group("conv1.weight") == "conv1"
    assert param_group("dense2.bias") == "dense2"


def test_sgd_step(rng):
    params, grads = _setup(rng)
    before = {k: v.copy() for k, v in params.items()}
    state = OptimizerState(OptimizerConfig(rule=OptimizerRule.SGD, lr=0.1), params)
    optimizer_step(params, grads, state)
    for k in params:
        np.testing.assert_allclose(params[k], before[k] - 0.1 * grads[k])


def test_adam_first_step_moves_by_lr(rng):
    params, grads = _setup(rng)
    before = {k: v.copy() for k, v in params.items()}
    state = OptimizerState(OptimizerConfig(), params)
    optimizer_step(params, grads, state)
    # bias-corrected first step is lr * sign(g) up to eps
    for k in params:
        np.testing.assert_allclose(params[k], before[k] - 1e-3 * np.sign(grads[k]), rtol=1e-5)
    assert state.step == 1


def test_masked_positions_stay_bit_identical(rng):
    params, grads = _setup(rng)
    mask = rng.random((4, 1, 3)) > 0.5
    params["conv1.weight"] = np.where(mask, params["conv1.weight"], 0.0)
    state = OptimizerState(OptimizerConfig(), params)
    for _ in range(5):
        optimizer_step(params, {k: rng.normal(size=v.shape) for k, v in params.items()}, state, {"conv1": mask})
    assert np.all(params["conv1.weight"][~mask] == 0.0)
    assert np.all(state.m["conv1.weight"][~mask] == 0.0)


def test_frozen_group_is_untouched(rng):
    params, grads = _setup(rng)
    before = {k: v.copy() for k, v in params.items()}
    state = OptimizerState(OptimizerConfig(rule=OptimizerRule.SGD, lr=0.5), params)
    optimizer_step(params, grads, state, trainable={"conv1": False, "dense1": True})
    np.testing.assert_array_equal(params["conv1.weight"], before["conv1.weight"])
    np.testing.assert_array_equal(params["conv1.bias"], before["conv1.bias"])
    assert not np.array_equal(params["dense1.weight"], before["dense1.weight"])


def test_zero_learning_rate_changes_nothing(rng):
    params, grads = _setup(rng)
    before = {k: v.copy() for k, v in params.items()}
    for rule in OptimizerRule:
        optimizer_step(params, grads, OptimizerState(OptimizerConfig(rule=rule, lr=0.0), params))
    for k in params:
        np.testing.assert_array_equal(params[k], before[k])
