"""
Layer primitives in two flavours: plain (values only, arrays or tensors) and
dual (value plus exact time derivative, propagated forward through each layer).
"""

from dataclasses import dataclass

import numpy as np

from app.autodiff.tape import Tensor

LAYER_NORM_EPS = 1e-5


@dataclass
class Dual:
    """A batch of values together with their derivative with respect to time."""
    value: Tensor
    tangent: Tensor

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.value.data).all() and np.isfinite(self.tangent.data).all())


def _sigmoid(x):
    if isinstance(x, Tensor):
        return x.sigmoid()
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def _rsqrt(x):
    if isinstance(x, Tensor):
        return x.rsqrt()
    return 1.0 / np.sqrt(x)


def silu(x):
    """x * sigmoid(x)."""
    return x * _sigmoid(x)


def layer_norm(v, gain, bias, eps: float = LAYER_NORM_EPS):
    """Normalize over the last axis to zero mean and unit variance, then scale and shift."""
    centred = v - v.mean(axis=-1, keepdims=True)
    var = (centred * centred).mean(axis=-1, keepdims=True)
    return centred * _rsqrt(var + eps) * gain + bias


def dropout(v, mask, rate: float):
    """Zero the entries where mask is False and rescale the survivors."""
    return v * (np.asarray(mask, dtype=np.float64) / (1.0 - rate))


# dual propagation

def linear_dual(x: Dual, weight: Tensor, bias: Tensor) -> Dual:
    return Dual(x.value @ weight + bias, x.tangent @ weight)


def silu_dual(x: Dual) -> Dual:
    s = _sigmoid(x.value)
    value = x.value * s
    slope = s + x.value * s * (1.0 - s)
    return Dual(value, x.tangent * slope)


def dropout_dual(x: Dual, mask: np.ndarray, rate: float) -> Dual:
    scale = np.asarray(mask, dtype=np.float64) / (1.0 - rate)
    return Dual(x.value * scale, x.tangent * scale)


def layer_norm_dual(x: Dual, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Dual:
    v, dv = x.value, x.tangent
    centred = v - v.mean(axis=-1, keepdims=True)
    d_centred = dv - dv.mean(axis=-1, keepdims=True)
    var = (centred * centred).mean(axis=-1, keepdims=True)
    d_var = (centred * d_centred).mean(axis=-1, keepdims=True) * 2.0
    r = _rsqrt(var + eps)
    d_r = r * r * r * d_var * (-0.5)
    normed = centred * r
    d_normed = d_centred * r + centred * d_r
    return Dual(normed * gain + bias, d_normed * gain)
