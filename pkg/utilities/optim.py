"""
Masked Parameter Updates
========================

Plain gradient descent and the adaptive-moment rule, applied so that pruned
positions (mask 0) and frozen parameter groups are left bit-identical.
"""

import numpy as np

from data.models import OptimizerConfig, OptimizerRule


def param_group(name: str) -> str:
    """"conv1.weight" -> "conv1"."""
    return name.split(".", 1)[0]


class OptimizerState:
    """
    Accumulators for one optimization run.

    First/second moments are only allocated for the adaptive rule; the step
    counter grows by one per `optimizer_step` call.
    """
    def __init__(self, config: OptimizerConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        if config.rule == OptimizerRule.ADAM:
            self.m = {name: np.zeros_like(p) for name, p in params.items()}
            self.v = {name: np.zeros_like(p) for name, p in params.items()}


def optimizer_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    masks: dict[str, np.ndarray] | None = None,
    trainable: dict[str, bool] | None = None,
) -> dict[str, np.ndarray]:
    """
    Updates `params` in place by the configured rule and returns it.

    A position is left untouched when its layer mask is 0 or its group's
    trainable flag is False.
    """
    masks = masks or {}
    trainable = trainable or {}
    cfg = state.config
    state.step += 1
    t = state.step

    for name, grad in grads.items():
        group = param_group(name)
        if not trainable.get(group, True):
            continue
        p = params[name]
        mask = masks.get(group) if name.endswith(".weight") else None

        if cfg.rule == OptimizerRule.ADAM:
            m = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * grad
            v = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * grad * grad
            if mask is not None:
                m = np.where(mask, m, 0.0)
                v = np.where(mask, v, 0.0)
            state.m[name], state.v[name] = m, v
            m_hat = m / (1.0 - cfg.beta1 ** t)
            v_hat = v / (1.0 - cfg.beta2 ** t)
            delta = cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        else:
            delta = cfg.lr * grad

        if cfg.lr == 0.0:
            continue
        if mask is None:
            params[name] = p - delta
        else:
            params[name] = np.where(mask, p - delta, p)
    return params
