"""
AdamW with decoupled weight decay and the cosine-annealing schedule
"""

import math
from dataclasses import dataclass

import numpy as np

from app.models.network import ParamStore
from app.utils.errors import DimensionError
from app.utils.validation import TrainConfig


def cosine_lr(T_cur: int, config: TrainConfig) -> float:
    """eta_min + (eta0 - eta_min)(1 + cos(pi T_cur / T_max)) / 2."""
    if not 0 <= T_cur <= config.T_max or config.T_max < 1:
        raise DimensionError(f"T_cur={T_cur} outside [0, {config.T_max}]")
    return config.eta_min + 0.5 * (config.eta0 - config.eta_min) * (
        1 + math.cos(math.pi * T_cur / config.T_max))


@dataclass
class AdamWState:
    step: int
    exp_avg: ParamStore
    exp_avg_sq: ParamStore

    @classmethod
    def zeros(cls, params: ParamStore) -> "AdamWState":
        return cls(step=0, exp_avg=params.zeros_like(), exp_avg_sq=params.zeros_like())


def adamw_step(params: ParamStore, grads: ParamStore, state: AdamWState, lr: float,
               config: TrainConfig):
    """One in-place AdamW update; decay is applied as theta <- theta - lr*lambda*theta first."""
    beta1, beta2 = config.beta1, config.beta2
    state.step += 1
    t = state.step
    bias_correction1 = 1 - beta1 ** t
    bias_correction2 = 1 - beta2 ** t

    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"Gradient for '{name}' has shape {g.shape}, expected {p.shape}")
        exp_avg = state.exp_avg[name]
        exp_avg_sq = state.exp_avg_sq[name]

        if config.weight_decay != 0:
            p *= 1 - lr * config.weight_decay

        exp_avg *= beta1
        exp_avg += (1 - beta1) * g
        exp_avg_sq *= beta2
        exp_avg_sq += (1 - beta2) * g * g

        denom = np.sqrt(exp_avg_sq / bias_correction2) + config.eps
        p -= (lr / bias_correction1) * exp_avg / denom

    return params, state
