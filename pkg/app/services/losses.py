"""
Physics-informed loss terms. Every function accepts plain arrays or tape
tensors; tensors in give tensors out so the result can be back-propagated.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping

import numpy as np

from app.autodiff.tape import Tensor
from app.models.quantum import SystemSpec, rhs_O, rhs_Q, rhs_rho
from app.utils.errors import DimensionError

logger = logging.getLogger(__name__)

# L_er on the true solution must sit below this fraction of lambda_er
TAU_CALIBRATION_RATIO = -np.log(0.01)


@dataclass
class HeadTrajectory:
    """A matrix trajectory (N, d, d) and its time derivative, arrays or tensors."""
    value: object
    derivative: object


def _detach(x):
    return x.detach() if isinstance(x, Tensor) else x


def _mean_sq_norm(residual):
    """Mean over grid points of the squared Frobenius norm."""
    n = residual.shape[0]
    if isinstance(residual, Tensor):
        return residual.abs2().sum() * (1.0 / n)
    r = np.asarray(residual)
    return float(np.sum(r.real ** 2 + r.imag ** 2) / n)


def loss_mod(target: str, trajectories: Mapping[str, HeadTrajectory], spec: SystemSpec,
             detach_cross: bool = True):
    """Mean squared residual of dA/dt - F_A on the grid for A in {O, Q, rho}.

    For A = rho the O and Q entries are priors and are always treated as constants.
    """
    if target == "rho":
        rho = trajectories["rho"]
        O = _detach(trajectories["O"].value)
        Q = _detach(trajectories["Q"].value)
        if O.shape != rho.value.shape or Q.shape != rho.value.shape:
            raise DimensionError("Priors and density trajectory are on different grids")
        residual = rho.derivative - rhs_rho(rho.value, O, Q, spec, check=False)
        return _mean_sq_norm(residual)

    O, Q = trajectories["O"], trajectories["Q"]
    if O.value.shape != Q.value.shape or O.derivative.shape != O.value.shape:
        raise DimensionError("Operator trajectories have mismatched shapes")
    if target == "O":
        q = _detach(Q.value) if detach_cross else Q.value
        residual = O.derivative - rhs_O(O.value, q, spec)
    elif target == "Q":
        o = _detach(O.value) if detach_cross else O.value
        residual = Q.derivative - rhs_Q(o, Q.value, spec)
    else:
        raise DimensionError(f"Unknown loss target '{target}'")
    return _mean_sq_norm(residual)


def loss_ini(value_at_t0, target):
    """Squared Frobenius distance of A(t0) to its target."""
    diff = value_at_t0 - np.asarray(target)
    if isinstance(diff, Tensor):
        return diff.abs2().sum()
    d = np.asarray(diff)
    return float(np.sum(d.real ** 2 + d.imag ** 2))


def total_variation(features):
    """Mean L1 step between consecutive samples of a real feature trajectory (N, n)."""
    n = features.shape[0]
    if n < 2:
        raise DimensionError("Total variation needs at least two samples")
    steps = features[1:] - features[:-1]
    if isinstance(steps, Tensor):
        return steps.abs().sum() * (1.0 / (n - 1))
    return float(np.sum(np.abs(steps)) / (n - 1))


def loss_er(features, lambda_er: float, tau: float):
    """lambda_er * exp(-TV / tau): full weight on static trajectories, vanishing once they move."""
    if not tau > 0:
        raise DimensionError("tau must be positive")
    tv = total_variation(features)
    if isinstance(tv, Tensor):
        return (tv * (-1.0 / tau)).exp() * lambda_er
    return lambda_er * float(np.exp(-tv / tau))


def check_tau_calibration(features_by_head: Dict[str, np.ndarray], tau: float) -> Dict[str, float]:
    """TV of reference trajectories per head; warns when the regularizer would stay active on them."""
    tvs = {}
    for head, features in features_by_head.items():
        if features.shape[0] < 2:
            continue
        tv = total_variation(np.asarray(features))
        tvs[head] = tv
        if tv < TAU_CALIBRATION_RATIO * tau:
            logger.warning("TV of the reference %s trajectory (%.3e) is below %.1f*tau; "
                           "L_er stays active on the true solution", head, tv, TAU_CALIBRATION_RATIO)
    return tvs
